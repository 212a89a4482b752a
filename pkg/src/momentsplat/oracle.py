"""Reference computations used to validate the renderer.

Nothing here reuses the analytic moment code: optical depth is an explicit
sum of normal-CDF differences, moments come from adaptive quadrature of the
exact (nonlinear) warp, and radiance is integrated with composite
Gauss-Legendre panels placed on each particle's support.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .core import Gaussian1D, Ray, Scene, evaluate_sh, project_to_rays
from .errors import UsageError
from .warp import WarpConfig, warp

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OracleConfig:
    """Settings of the reference integrators.

    Attributes:
        gl_order: Gauss-Legendre nodes per panel.
        horizon: support half-width in stddevs; mass beyond 8 is below 1e-15.
        panel_width: panel width in stddevs of the owning particle.
        tolerance: allowed change when all panels are halved.
        quad_tol: absolute tolerance of the adaptive moment quadrature.
    """

    gl_order: int = 8
    horizon: float = 8.0
    panel_width: float = 1.0
    tolerance: float = 1e-6
    quad_tol: float = 1e-10

    def __post_init__(self):
        if self.gl_order < 2 or self.horizon < 6 or self.panel_width <= 0:
            raise UsageError("oracle configuration too coarse")


def _params(g1s):
    if isinstance(g1s, Gaussian1D):
        g1s = [g1s]
    arr = np.asarray([tuple(g) for g in g1s], dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _cdf_diff(lo, hi):
    """``Phi(hi) - Phi(lo)`` without cancellation in either tail."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    upper_tail = special.ndtr(-lo) - special.ndtr(-hi)
    lower_tail = special.ndtr(hi) - special.ndtr(lo)
    return np.where(lo > 0, upper_tail, lower_tail)


def exact_optical_depth(g1s, t, t_n: float) -> np.ndarray:
    """Closed-form optical depth ``tau(t)`` of a 1D mixture, accumulated from ``t_n``.

    ``t`` may be an array (or ``inf``); the result has its shape.
    """
    a, m, s = _params(g1s)
    t = np.asarray(t, dtype=float)
    if a.size == 0:
        return np.zeros(t.shape)
    zt = (t[..., None] - m) / s
    zn = (t_n - m) / s
    tau = np.sum(a * s * SQRT_2PI * _cdf_diff(zn, zt), axis=-1)
    return np.where(t <= t_n, 0.0, tau)


def isolated_opacity(g, origins, directions, t_n: float = 0.0) -> np.ndarray:
    """``1 - exp(-tau_bar)`` of one 3D primitive along each ray."""
    a, m, s = project_to_rays(g, origins, directions)
    tau = a * s * SQRT_2PI * special.ndtr((m - t_n) / s)
    return -np.expm1(-tau)


def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_edges(m, s, t_n, t_f, cfg: OracleConfig, refine: int):
    """Sorted panel edges per ray, shape ``(rays, edges)``; spans each support."""
    steps = np.arange(-cfg.horizon, cfg.horizon + 1e-9, cfg.panel_width / refine)
    edges = (m[..., None] + s[..., None] * steps).reshape(m.shape[0], -1)
    edges = np.concatenate([edges, np.full((m.shape[0], 1), t_n)], axis=-1)
    hi = t_f if math.isfinite(t_f) else np.inf
    return np.sort(np.clip(edges, t_n, hi), axis=-1)


def _radiance_batch(a, m, s, colors, bg, t_n, t_f, cfg: OracleConfig, refine: int):
    """Integrate ``T(t) sum_i sigma_i(t) c_i`` per ray. Arrays are ``(rays, particles)``."""
    R, P = a.shape
    if P == 0:
        return np.broadcast_to(bg, (R, 3)).copy(), np.zeros(R)
    edges = _panel_edges(m, s, t_n, t_f, cfg, refine)
    u, w = _gl(cfg.gl_order)
    lo, hi = edges[:, :-1], edges[:, 1:]
    width = hi - lo
    t = lo[..., None] + width[..., None] * u  # (R, panels, order)
    t = t.reshape(R, -1)
    wt = (width[..., None] * w).reshape(R, -1)
    z = (t[..., None] - m[:, None, :]) / s[:, None, :]  # (R, nodes, P)
    sigma = a[:, None, :] * np.exp(-0.5 * z * z)
    zn = (t_n - m) / s
    # absolute accuracy is all the radiance needs, so a plain CDF difference will do
    tau = np.einsum("rnp,rp->rn", special.ndtr(z), a * s * SQRT_2PI) - np.sum(a * s * SQRT_2PI * special.ndtr(zn), axis=-1)[:, None]
    tau = np.maximum(tau, 0.0)
    T = np.exp(-tau)
    emitted = np.einsum("rn,rnp,rpc->rc", wt * T, sigma, colors)
    hi_z = np.full_like(zn, np.inf) if not math.isfinite(t_f) else (t_f - m) / s
    tau_end = np.sum(a * s * SQRT_2PI * _cdf_diff(zn, hi_z), axis=-1)
    alpha = -np.expm1(-tau_end)
    return emitted + np.exp(-tau_end)[:, None] * bg, alpha


def oracle_radiance_batch(scene: Scene, origins, directions, t_n: float = 0.01, t_f: float = math.inf,
                          cfg: OracleConfig = OracleConfig(), check: bool = True):
    """Reference radiance and alpha for a batch of rays sharing one near/far range."""
    origins = np.broadcast_to(np.asarray(origins, float), np.shape(directions)).reshape(-1, 3)
    directions = np.asarray(directions, float).reshape(-1, 3)
    R = len(directions)
    P = len(scene.gaussians)
    a = np.empty((R, P))
    m = np.empty((R, P))
    s = np.empty((R, P))
    colors = np.empty((R, P, 3))
    for i, g in enumerate(scene.gaussians):
        a[:, i], m[:, i], s[:, i] = project_to_rays(g, origins, directions)
        colors[:, i] = evaluate_sh(g.sh, directions)
    rgb, alpha = _radiance_batch(a, m, s, colors, scene.background, t_n, t_f, cfg, 1)
    if check and P:
        fine, _ = _radiance_batch(a, m, s, colors, scene.background, t_n, t_f, cfg, 2)
        change = float(np.max(np.abs(fine - rgb))) if R else 0.0
        if change >= cfg.tolerance:
            warnings.warn(f"oracle radiance changed by {change:.3g} under panel halving", RuntimeWarning)
        rgb = fine
    return rgb, alpha


def oracle_radiance(scene: Scene, ray: Ray, cam_dir=None, cfg: OracleConfig = OracleConfig()) -> np.ndarray:
    """Reference radiance along one ray. ``cam_dir`` overrides the SH view direction."""
    if cam_dir is not None and not np.allclose(cam_dir, ray.direction):
        raise UsageError("cam_dir must equal the ray direction for a pinhole camera")
    rgb, _ = oracle_radiance_batch(scene, ray.origin[None], ray.direction[None], ray.near, ray.far, cfg)
    return rgb[0]


def oracle_render(scene: Scene, cam, t_n: float = 0.01, t_f: float = math.inf, cfg: OracleConfig = OracleConfig(),
                  rows_per_chunk: int = 16) -> np.ndarray:
    """Ground-truth RGBA image ``(height, width, 4)``."""
    out = np.zeros((cam.height, cam.width, 4))
    origin = cam.center
    for r0 in range(0, cam.height, rows_per_chunk):
        rows = np.arange(r0, min(cam.height, r0 + rows_per_chunk))
        d = cam.pixel_grid_directions(rows)
        rgb, alpha = oracle_radiance_batch(scene, origin, d.reshape(-1, 3), t_n, t_f, cfg)
        out[rows, :, :3] = rgb.reshape(len(rows), cam.width, 3)
        out[rows, :, 3] = alpha.reshape(len(rows), cam.width)
    return out


def _integration_range(g1s, cfg: WarpConfig, horizon: float = 12.0):
    a, m, s = _params(g1s)
    hi = cfg.far
    if not math.isfinite(hi):
        hi = float(np.max(m + horizon * s)) if a.size else cfg.near + 1.0
    hi = max(hi, cfg.near)
    pts = sorted({float(np.clip(p, cfg.near, hi)) for mi, si in zip(m, s) for p in (mi - 3 * si, mi, mi + 3 * si)})
    return cfg.near, hi, [p for p in pts if cfg.near < p < hi]


def _quad(f, lo, hi, pts, tol):
    val, _ = integrate.quad(f, lo, hi, points=pts or None, epsabs=tol, epsrel=1e-12, limit=500)
    return val


def oracle_moments(g1s: Sequence, cfg: WarpConfig, n: int, kind: str = "power", theta: float = math.pi / 5,
                   tol: float = 1e-10) -> np.ndarray:
    """Exact moments of the mixture density in the warped domain (no linearization)."""
    a, m, s = _params(g1s)
    count = 2 * n + 1 if kind == "power" else n + 1
    if a.size == 0 or not np.any(a > 0):
        return np.zeros(count, dtype=float if kind == "power" else complex)
    lo, hi, pts = _integration_range(g1s, cfg)

    def sigma(t):
        return float(np.sum(a * np.exp(-0.5 * ((t - m) / s) ** 2)))

    def g(t):
        return float(warp(t, cfg))

    if kind == "power":
        return np.array([_quad(lambda t, k=k: g(t) ** k * sigma(t), lo, hi, pts, tol) for k in range(count)])
    out = np.empty(count, dtype=complex)
    for k in range(count):
        al = k * (2.0 * math.pi - theta)
        re = _quad(lambda t: math.cos(al * g(t)) * sigma(t), lo, hi, pts, tol)
        im = _quad(lambda t: math.sin(al * g(t)) * sigma(t), lo, hi, pts, tol)
        out[k] = re + 1j * im
    return out


def oracle_linearized_moments(g1: Gaussian1D, cfg: WarpConfig, n: int, kind: str = "power",
                              theta: float = math.pi / 5, slope: float | None = None, tol: float = 0.0) -> np.ndarray:
    """Quadrature of the particle integrand with the warp replaced by its tangent at the mean.

    ``slope`` defaults to a central finite difference of the warp, so the
    tangent does not depend on the analytic derivative used elsewhere.
    """
    amp, mean, sd = (float(v) for v in g1)
    lo, hi, pts = _integration_range([g1], cfg, horizon=40.0)
    g0 = float(warp(mean, cfg))
    if slope is None:
        h = 1e-5 * max(1.0, mean)
        slope = float((warp(mean + h, cfg) - warp(mean - h, cfg)) / (2 * h))

    def u(t):
        return g0 + slope * (t - mean)

    def sigma(t):
        return amp * math.exp(-0.5 * ((t - mean) / sd) ** 2)

    if kind == "power":
        return np.array([_quad(lambda t, k=k: u(t) ** k * sigma(t), lo, hi, pts, tol) for k in range(2 * n + 1)])
    out = np.empty(n + 1, dtype=complex)
    for k in range(n + 1):
        al = k * (2.0 * math.pi - theta)
        out[k] = _quad(lambda t: math.cos(al * u(t)) * sigma(t), lo, hi, pts, tol) + 1j * _quad(
            lambda t: math.sin(al * u(t)) * sigma(t), lo, hi, pts, tol)
    return out


def raw_moment(g1: Gaussian1D, k: int, t_n: float = 0.0, t_f: float = math.inf) -> float:
    """``int t^k sigma(t) dt`` over ``[t_n, t_f]`` by adaptive quadrature."""
    amp, mean, sd = (float(v) for v in g1)
    lo, hi = max(t_n, mean - 40 * sd), min(t_f, mean + 40 * sd)
    return amp * _quad(lambda t: t**k * math.exp(-0.5 * ((t - mean) / sd) ** 2), lo, hi, [mean] if lo < mean < hi else [], 0.0)


def complex_erf_reference(z) -> complex:
    """``erf`` for complex arguments with ``|Im z| <= 10`` (Faddeeva-based)."""
    z = complex(z)
    if not (abs(z.imag) <= 10.0) or not math.isfinite(z.real):
        raise UsageError("complex_erf_reference needs finite z with |Im z| <= 10")
    return complex(special.erf(z))
