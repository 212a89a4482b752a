"""Domain primitives: 3D Gaussians, rays, cameras, scenes.

Also holds the exact restriction of a 3D Gaussian to a ray. The covariance
is never inverted; every quadratic form goes through the whitened vectors
``o_g = S^-1 R^T (o - mu)`` and ``d_g = S^-1 R^T d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidPrimitiveError

FAR_SENTINEL = math.inf

# Real spherical harmonics, 3DGS sign convention.
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)
SH_OFFSET = 0.5
_TINY_SCALE = np.finfo(float).tiny


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion stored as (w, x, y, z)."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Inverse of :func:`quat_to_matrix` (w >= 0 branch)."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * math.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = [0.0, 0.0, 0.0, 0.0]
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def sh_degree_of(n_coeffs: int) -> int:
    degree = int(round(math.sqrt(n_coeffs))) - 1
    if (degree + 1) ** 2 != n_coeffs or not 0 <= degree <= 3:
        raise InvalidPrimitiveError(f"invalid number of SH coefficients: {n_coeffs}")
    return degree


@dataclass(frozen=True, eq=False)
class Gaussian3D:
    """One volumetric primitive.

    Attributes:
        weight: peak extinction density, ``>= 0``.
        mean: centre in world units.
        rotation: unit quaternion (w, x, y, z).
        scale: positive per-axis standard deviations.
        sh: SH coefficient block of shape ``((degree + 1)**2, 3)``.
    """

    weight: float
    mean: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    sh: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(4))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float).reshape(3))
        sh = np.asarray(self.sh, dtype=float)
        if sh.ndim == 1:
            sh = sh.reshape(-1, 3)
        object.__setattr__(self, "sh", sh)
        if not (np.isfinite(self.weight) and self.weight >= 0):
            raise InvalidPrimitiveError(f"weight must be finite and >= 0, got {self.weight}")
        if not np.all(np.isfinite(self.mean)):
            raise InvalidPrimitiveError("mean must be finite")
        if not np.all(self.scale > _TINY_SCALE) or not np.all(np.isfinite(self.scale)):
            raise InvalidPrimitiveError(f"scales must be positive and normal, got {self.scale}")
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise InvalidPrimitiveError("rotation quaternion is not normalized")
        sh_degree_of(sh.shape[0])
        if sh.shape[1] != 3:
            raise InvalidPrimitiveError("SH coefficients need 3 channels")

    @classmethod
    def create(cls, weight, mean, scale, rotation=(1.0, 0.0, 0.0, 0.0), sh=None, color=None):
        """Build a primitive, normalizing the quaternion.

        ``color`` is a convenience for degree-0 appearance: the DC coefficient
        is chosen so that :func:`evaluate_sh` returns exactly ``color``.
        """
        q = np.asarray(rotation, dtype=float)
        norm = np.linalg.norm(q)
        if norm == 0:
            raise InvalidPrimitiveError("zero quaternion")
        if sh is None:
            sh = np.zeros((1, 3))
            if color is not None:
                sh[0] = (np.asarray(color, dtype=float) - SH_OFFSET) / SH_C0
        return cls(float(weight), mean, q / norm, scale, sh)

    @property
    def sh_degree(self) -> int:
        return sh_degree_of(self.sh.shape[0])

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def covariance(self) -> np.ndarray:
        """``R S S^T R^T``; for diagnostics and oracles only."""
        R = self.rotation_matrix
        return R @ np.diag(self.scale**2) @ R.T

    def precision(self) -> np.ndarray:
        """``R S^-2 R^T``, assembled from factors without a matrix inverse."""
        R = self.rotation_matrix
        return R @ np.diag(self.scale**-2) @ R.T

    def density(self, x) -> np.ndarray:
        """Direct evaluation of ``w * G(x | mu, Sigma)`` at points ``(..., 3)``."""
        x = np.asarray(x, dtype=float)
        y = (x - self.mean) @ self.rotation_matrix / self.scale
        return self.weight * np.exp(-0.5 * np.sum(y * y, axis=-1))

    def replace(self, **changes) -> "Gaussian3D":
        params = dict(weight=self.weight, mean=self.mean, rotation=self.rotation, scale=self.scale, sh=self.sh)
        params.update(changes)
        return Gaussian3D(**params)

    def key(self) -> bytes:
        """Canonical byte key used to fix reduction order in deterministic mode."""
        parts = [np.float64(self.weight), self.mean, self.scale, self.rotation, self.sh.ravel()]
        return b"".join(np.asarray(p, dtype="<f8").tobytes() for p in parts)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    near: float = 0.01
    far: float = FAR_SENTINEL

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float).reshape(3))
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise InvalidPrimitiveError("ray direction must be unit length")
        if not (self.near >= 0 and self.far > self.near):
            raise InvalidPrimitiveError(f"need 0 <= near < far, got {self.near}, {self.far}")

    @classmethod
    def towards(cls, origin, direction, near=0.01, far=FAR_SENTINEL) -> "Ray":
        d = np.asarray(direction, dtype=float)
        return cls(origin, d / np.linalg.norm(d), near, far)

    def at(self, t) -> np.ndarray:
        return self.origin + np.multiply.outer(np.asarray(t, dtype=float), self.direction)


class Gaussian1D(NamedTuple):
    """Density of one primitive restricted to a ray: ``amplitude * exp(-(t-mean)^2 / (2 stddev^2))``."""

    amplitude: float
    mean: float
    stddev: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-0.5 * ((t - self.mean) / self.stddev) ** 2)


def _whiten(g: Gaussian3D, origins, directions):
    Rs = g.rotation_matrix / g.scale  # columns scaled: (v @ R) / s == S^-1 R^T v
    og = (np.asarray(origins, dtype=float) - g.mean) @ Rs
    dg = np.asarray(directions, dtype=float) @ Rs
    return og, dg


def project_to_rays(g: Gaussian3D, origins, directions):
    """Vectorized :func:`project_to_ray` over arrays of rays.

    Returns ``(amplitude, mean, stddev)`` arrays with the broadcast shape of
    the ray batch (without the trailing 3).
    """
    og, dg = _whiten(g, origins, directions)
    dd = np.sum(dg * dg, axis=-1)
    od = np.sum(og * dg, axis=-1)
    mean = -od / dd
    var = 1.0 / dd
    # K = -1/2 |o_g|^2 + 1/2 (o_g.d_g)^2/|d_g|^2, written as the squared norm of
    # the component of o_g orthogonal to d_g so that K <= 0 holds exactly.
    perp = og - (od / dd)[..., None] * dg
    K = -0.5 * np.sum(perp * perp, axis=-1)
    K = np.minimum(K, 0.0)
    return g.weight * np.exp(K), mean, np.sqrt(var)


def project_to_ray(g: Gaussian3D, r: Ray) -> Gaussian1D:
    """Exact 1D Gaussian describing ``g`` along ``r``."""
    if not np.all(g.scale > _TINY_SCALE):
        raise InvalidPrimitiveError("degenerate scale")
    a, m, s = project_to_rays(g, r.origin, r.direction)
    return Gaussian1D(float(a), float(m), float(s))


def evaluate_sh(sh, d) -> np.ndarray:
    """RGB radiance of an SH block in unit direction(s) ``d``.

    Uses ``sum c_lm Y_lm(d) + 0.5`` clamped at zero. ``d`` may be ``(3,)`` or
    ``(..., 3)``; the result has shape ``(..., 3)``.
    """
    sh = np.asarray(sh, dtype=float)
    degree = sh_degree_of(sh.shape[0])
    d = np.asarray(d, dtype=float)
    x, y, z = d[..., 0:1], d[..., 1:2], d[..., 2:3]
    out = SH_C0 * sh[0] + np.zeros(d.shape[:-1] + (3,))
    if degree >= 1:
        out = out - SH_C1 * y * sh[1] + SH_C1 * z * sh[2] - SH_C1 * x * sh[3]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out = (
            out
            + SH_C2[0] * xy * sh[4]
            + SH_C2[1] * yz * sh[5]
            + SH_C2[2] * (2.0 * zz - xx - yy) * sh[6]
            + SH_C2[3] * xz * sh[7]
            + SH_C2[4] * (xx - yy) * sh[8]
        )
        if degree >= 3:
            out = (
                out
                + SH_C3[0] * y * (3 * xx - yy) * sh[9]
                + SH_C3[1] * xy * z * sh[10]
                + SH_C3[2] * y * (4 * zz - xx - yy) * sh[11]
                + SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy) * sh[12]
                + SH_C3[4] * x * (4 * zz - xx - yy) * sh[13]
                + SH_C3[5] * z * (xx - yy) * sh[14]
                + SH_C3[6] * x * (xx - 3 * yy) * sh[15]
            )
    return np.maximum(out + SH_OFFSET, 0.0)


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera.

    ``K`` maps camera coordinates to pixels; pixel ``(i, j)`` has its centre at
    ``(i + 0.5, j + 0.5)``. ``R`` and ``t`` map world points into the camera
    frame: ``x_cam = R x_world + t``. The camera looks down ``+z``.
    """

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float).reshape(3, 3)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))
        if abs(K[2, 2] - 1.0) > 1e-12 or K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0:
            raise InvalidPrimitiveError("K must be upper triangular with K[2,2] = 1")
        if abs(np.linalg.det(K)) < 1e-300:
            raise InvalidPrimitiveError("K must be invertible")
        if self.width <= 0 or self.height <= 0:
            raise InvalidPrimitiveError("image size must be positive")

    @classmethod
    def look_at(cls, eye, target, up=(0.0, -1.0, 0.0), fov_deg=50.0, width=256, height=256) -> "Camera":
        """Camera at ``eye`` looking at ``target`` (image y grows along ``up``'s opposite)."""
        eye = np.asarray(eye, dtype=float)
        fwd = np.asarray(target, dtype=float) - eye
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=float))
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd])
        f = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
        K = np.array([[f, 0.0, width / 2], [0.0, f, height / 2], [0.0, 0.0, 1.0]])
        return cls(K, R, -R @ eye, width, height)

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    @property
    def K_inv(self) -> np.ndarray:
        return np.linalg.inv(self.K)

    def to_camera(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.R.T + self.t

    def pixel_directions(self, u, v) -> np.ndarray:
        """Unit world-space directions through pixel coordinates ``(u, v)``."""
        p = np.stack([np.asarray(u, dtype=float), np.asarray(v, dtype=float), np.ones(np.shape(u))], axis=-1)
        d_cam = p @ self.K_inv.T
        d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
        return d_cam @ self.R

    def pixel_grid_directions(self, rows=None) -> np.ndarray:
        """Directions through pixel centres, shape ``(len(rows), width, 3)``."""
        rows = np.arange(self.height) if rows is None else np.asarray(rows)
        u, v = np.meshgrid(np.arange(self.width) + 0.5, rows + 0.5)
        return self.pixel_directions(u, v)

    def frustum_planes(self, near: float = 0.0):
        """Inward unit normals ``n`` and offsets ``b`` (inside iff ``n.x + b >= 0``) in camera space."""
        Ki = self.K_inv
        corners = [Ki @ np.array(c) for c in ((0, 0, 1), (self.width, 0, 1), (self.width, self.height, 1), (0, self.height, 1))]
        normals = []
        for a, b in zip(corners, corners[1:] + corners[:1]):
            n = np.cross(a, b)
            n /= np.linalg.norm(n)
            if n @ np.array([0.0, 0.0, 1.0]) < 0:
                n = -n
            normals.append(n)
        normals.append(np.array([0.0, 0.0, 1.0]))
        offsets = [0.0, 0.0, 0.0, 0.0, -near]
        return np.array(normals), np.array(offsets)


@dataclass(frozen=True)
class Scene:
    gaussians: tuple
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "gaussians", tuple(self.gaussians))
        bg = np.asarray(self.background, dtype=float).reshape(3)
        if np.any(bg < 0) or not np.all(np.isfinite(bg)):
            raise InvalidPrimitiveError("background radiance must be finite and >= 0")
        object.__setattr__(self, "background", bg)

    def __len__(self):
        return len(self.gaussians)

    def permuted(self, order: Sequence[int]) -> "Scene":
        return Scene(tuple(self.gaussians[i] for i in order), self.background)


CULL_MARGIN = 3.0


def bounding_sphere_cull(g: Gaussian3D, cam: Camera, k_cull: float = CULL_MARGIN, near: float = 0.0) -> bool:
    """True iff the sphere of radius ``k_cull * max(scale)`` around the mean touches the frustum."""
    r = k_cull * float(np.max(g.scale))
    normals, offsets = cam.frustum_planes(near)
    dist = normals @ cam.to_camera(g.mean) + offsets
    return bool(np.all(dist >= -r))
