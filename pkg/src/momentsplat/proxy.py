"""Screen-space footprints of 3D Gaussians.

The confidence proxy is the perspective image of the set of rays along which
a particle's isolated opacity reaches ``c``. Along a ray with direction ``d``
the optical depth is ``w sqrt(2 pi) s(d) exp(-(mu^T A mu - (d^T A mu)^2 / d^T A d) / 2)``
(``A`` the precision); fixing ``d^T A d`` at its value on the central ray
turns the level set into the cone ``d^T (A mu mu^T A - kappa A) d = 0``, which
the intrinsics map to the conic ``p^T W p = 0`` on the image plane.

The EWA proxy is the usual first-order projection of the covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Camera, Gaussian3D
from .errors import ProxyDegenerateError

DEFAULT_CONFIDENCE = 0.01
EWA_SIGMAS = 3.0
NEAR_FACTOR = 4.0 * math.sqrt(2.0)


@dataclass
class ScreenEllipse:
    """Projected footprint.

    ``rect`` is ``(x0, x1, y0, y1)`` in half-open pixel index ranges, already
    clipped to the image; it is empty when ``x0 >= x1`` or ``y0 >= y1``.
    """

    center: np.ndarray
    cov: np.ndarray
    rect: tuple
    fallback: bool = False
    near_flag: bool = False
    eigvals: np.ndarray = field(default=None)
    eigvecs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.eigvals is None and self.cov is not None:
            self.eigvals, self.eigvecs = np.linalg.eigh(self.cov)

    @property
    def empty(self) -> bool:
        x0, x1, y0, y1 = self.rect
        return x0 >= x1 or y0 >= y1

    @property
    def pixel_count(self) -> int:
        x0, x1, y0, y1 = self.rect
        return max(0, x1 - x0) * max(0, y1 - y0)

    def mahalanobis(self, px, py):
        d = np.stack([np.asarray(px, float) - self.center[0], np.asarray(py, float) - self.center[1]], axis=-1)
        sol = np.linalg.solve(self.cov, d.reshape(-1, 2).T).T.reshape(d.shape)
        return np.sum(d * sol, axis=-1)

    def contains(self, px, py):
        """Ellipse membership of pixel-plane points (use pixel centres ``i + 0.5``)."""
        return self.mahalanobis(px, py) <= 1.0

    def in_rect(self, ix, iy):
        x0, x1, y0, y1 = self.rect
        ix, iy = np.asarray(ix), np.asarray(iy)
        return (ix >= x0) & (ix < x1) & (iy >= y0) & (iy < y1)

    def boundary(self, count: int = 128) -> np.ndarray:
        """Points on the ellipse, shape ``(count, 2)``."""
        t = np.linspace(0.0, 2.0 * math.pi, count)
        axes = self.eigvecs * np.sqrt(np.maximum(self.eigvals, 0.0))
        return self.center + np.cos(t)[:, None] * axes[:, 0] + np.sin(t)[:, None] * axes[:, 1]


def full_screen(cam: Camera, near_flag: bool = False) -> ScreenEllipse:
    c = np.array([cam.width / 2.0, cam.height / 2.0])
    cov = np.diag([float(cam.width) ** 2, float(cam.height) ** 2])
    return ScreenEllipse(c, cov, (0, cam.width, 0, cam.height), fallback=True, near_flag=near_flag)


def pixel_rect(center, half_x: float, half_y: float, width: int, height: int) -> tuple:
    """Indices whose pixel centres lie in the box ``center +- (half_x, half_y)``."""
    x0 = max(0, math.ceil(center[0] - half_x - 0.5))
    x1 = min(width, math.floor(center[0] + half_x - 0.5) + 1)
    y0 = max(0, math.ceil(center[1] - half_y - 0.5))
    y1 = min(height, math.floor(center[1] + half_y - 0.5) + 1)
    return (int(x0), int(max(x0, x1)), int(y0), int(max(y0, y1)))


def camera_frame(g: Gaussian3D, cam: Camera):
    """Mean and precision of ``g`` in the camera frame (precision from factors, no inverse)."""
    mu = cam.to_camera(g.mean)
    Rc = cam.R @ g.rotation_matrix
    A = (Rc / g.scale**2) @ Rc.T
    return mu, A


def signature_check(W) -> tuple:
    """Signs of the eigenvalues of a symmetric 3x3 matrix, descending."""
    ev = np.linalg.eigvalsh(np.asarray(W, dtype=float))[::-1]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(ev))))
    return tuple(int(np.sign(v)) if abs(v) > tol else 0 for v in ev)


def conic_matrix(g: Gaussian3D, cam: Camera, c: float = DEFAULT_CONFIDENCE):
    """``(W, kappa, mu^T A mu)`` of the confidence level set in homogeneous pixels."""
    mu, A = camera_frame(g, cam)
    u = mu / np.linalg.norm(mu)
    uAu = float(u @ A @ u)
    C = -math.log1p(-c) * math.sqrt(uAu) / math.sqrt(2.0 * math.pi)
    muAmu = float(mu @ A @ mu)
    with np.errstate(divide="ignore"):
        kappa = 2.0 * (math.log(C) - math.log(g.weight)) + muAmu if g.weight > 0 else math.inf
    Ki = cam.K_inv
    m = Ki.T @ (A @ mu)
    M = Ki.T @ A @ Ki
    W = np.outer(m, m) - kappa * M if math.isfinite(kappa) else -M
    return W, kappa, muAmu


def near_plane_flag(g: Gaussian3D, cam: Camera, near: float) -> bool:
    """True when the central ray's 1D mean is within ``4 sqrt(2)`` stddevs of the near bound."""
    mu, A = camera_frame(g, cam)
    u = mu / np.linalg.norm(mu)
    uAu = float(u @ A @ u)
    mean = float(u @ A @ mu) / uAu
    return mean - near <= NEAR_FACTOR / math.sqrt(uAu)


def confidence_proxy(g: Gaussian3D, cam: Camera, c: float = DEFAULT_CONFIDENCE, near: float = 0.0) -> ScreenEllipse:
    """Conic footprint of the pixels where the isolated opacity exceeds ``c``.

    Falls back to a flagged full-screen rectangle when the level set is not
    a real ellipse in front of the camera. Raises :class:`ProxyDegenerateError`
    when the partitioned conic does not yield a positive definite matrix.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    flag = near_plane_flag(g, cam, near)
    W, kappa, muAmu = conic_matrix(g, cam, c)
    if not kappa < muAmu or kappa <= 0:
        return full_screen(cam, flag)
    if signature_check(W) != (1, -1, -1):
        return full_screen(cam, flag)
    W22 = W[:2, :2]
    w21 = W[:2, 2]
    if np.any(np.linalg.eigvalsh(W22) >= 0):
        return full_screen(cam, flag)
    W22_inv = np.linalg.inv(W22)
    center = -W22_inv @ w21
    cov = (center @ W22 @ center - W[2, 2]) * W22_inv
    cov = 0.5 * (cov + cov.T)
    ev, evec = np.linalg.eigh(cov)
    if not np.all(ev > 0) or not np.all(np.isfinite(cov)):
        raise ProxyDegenerateError("screen-space conic is not an ellipse")
    half = np.abs(evec) @ np.sqrt(ev)  # AABB of the box spanned by sqrt(l_i) e_i
    rect = pixel_rect(center, half[0], half[1], cam.width, cam.height)
    return ScreenEllipse(center, cov, rect, fallback=False, near_flag=flag, eigvals=ev, eigvecs=evec)


def ewa_proxy(g: Gaussian3D, cam: Camera, sigmas: float = EWA_SIGMAS) -> ScreenEllipse:
    """First-order (Jacobian) projection of the covariance with a ``3 sigma`` rectangle."""
    mu = cam.to_camera(g.mean)
    if mu[2] <= 0:
        raise ProxyDegenerateError("Gaussian centre is behind the camera")
    Rc = cam.R @ g.rotation_matrix
    cov3 = (Rc * g.scale**2) @ Rc.T
    ph = cam.K @ mu
    center = ph[:2] / mu[2]
    J = (cam.K[:2, :] - np.outer(center, [0.0, 0.0, 1.0])) / mu[2]
    cov = J @ cov3 @ J.T
    cov = 0.5 * (cov + cov.T)
    half = sigmas * np.sqrt(np.diag(cov))
    rect = pixel_rect(center, half[0], half[1], cam.width, cam.height)
    return ScreenEllipse(center, cov, rect)


def compute_proxy(g: Gaussian3D, cam: Camera, mode: str = "confidence", c: float = DEFAULT_CONFIDENCE, near: float = 0.0):
    if mode == "confidence":
        return confidence_proxy(g, cam, c, near)
    if mode == "ewa":
        return ewa_proxy(g, cam)
    raise ValueError(f"unknown proxy mode {mode!r}")
