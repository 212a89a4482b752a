"""Density-control arithmetic: pruning metric, initialization, clone and split."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .core import Gaussian3D, Scene
from .errors import ConfigError, MomentSplatError

SQRT_2PI = math.sqrt(2.0 * math.pi)
MAX_INIT_OPACITY = 1.0 - 1e-4
TIE_TOL = 1e-9
GRID_HALF_WIDTH = 12.0
GRID_POINTS = 4096


@dataclass(frozen=True)
class SplitParams:
    """Split shrink ``gamma`` and offset ``delta`` (in units of the split-axis stddev).

    ``c`` is the confidence half-width that ties them: ``delta = c (1 - gamma)``.
    """

    gamma: float
    delta: float
    c: float
    objective: float = float("nan")

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")

    @classmethod
    def from_c_gamma(cls, c: float, gamma: float, objective: float = float("nan")) -> "SplitParams":
        return cls(gamma, c * (1.0 - gamma), c, objective)


# Reference constants; the float64 optimizer below lands slightly off them.
REFERENCE_SPLIT = SplitParams(0.6385502815246582, 0.6128153090966912, 0.6128153090966912 / (1 - 0.6385502815246582))


def view_independent_opacity(g: Gaussian3D) -> float:
    """Opacity through the centre along the shortest principal axis."""
    return -math.expm1(-SQRT_2PI * g.weight * float(np.min(g.scale)))


def init_density(o_init: float, scale, return_flag: bool = False):
    """Peak density giving opacity ``o_init`` across the average scale.

    Opacities ``>= 1`` are clamped to ``1 - 1e-4``; the clamp is reported
    when ``return_flag`` is set.
    """
    if not o_init > 0:
        raise ConfigError("initial opacity must be positive")
    clamped = o_init >= 1.0
    o = min(o_init, MAX_INIT_OPACITY)
    w = -math.log1p(-o) / (SQRT_2PI * float(np.mean(scale)))
    return (w, clamped) if return_flag else w


def clone(g: Gaussian3D):
    """Two copies with half the peak density each."""
    child = g.replace(weight=0.5 * g.weight)
    return child, g.replace(weight=0.5 * g.weight)


def split_axis(g: Gaussian3D) -> np.ndarray:
    """Unit eigenvector of the largest scale; ties go to the lexicographically first axis."""
    R = g.rotation_matrix
    s = g.scale
    top = float(np.max(s))
    tied = [R[:, i] for i in range(3) if s[i] >= top * (1.0 - TIE_TOL)]
    # an eigenvector is defined up to sign; use the one with a positive leading entry
    tied = [v if v[np.flatnonzero(np.abs(v) > 1e-12)[0]] > 0 else -v for v in tied]
    return min(tied, key=lambda v: tuple(v))


def split(g: Gaussian3D, params: SplitParams = REFERENCE_SPLIT):
    """Replace ``g`` by two particles offset by ``+-delta * s_max`` along the split axis.

    All three scales are multiplied by ``gamma``; the peak density is kept.
    """
    axis = split_axis(g)
    offset = params.delta * float(np.max(g.scale)) * axis
    scale = g.scale * params.gamma
    return g.replace(mean=g.mean + offset, scale=scale), g.replace(mean=g.mean - offset, scale=scale)


def prune_mask(scene: Scene, threshold: float) -> list:
    return [view_independent_opacity(g) < threshold for g in scene.gaussians]


def _grid(half_width=GRID_HALF_WIDTH, points=GRID_POINTS):
    return np.linspace(-half_width, half_width, points)


def opacity_profile(sigma: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``T(t) sigma(t)`` with ``T`` accumulated from the left end of the grid."""
    tau = integrate.cumulative_trapezoid(sigma, t, initial=0.0)
    return np.exp(-tau) * sigma


def split_objective(gamma: float, delta: float, t: np.ndarray | None = None) -> float:
    """Squared L2 distance between the opacity profiles before and after a split."""
    t = _grid() if t is None else t
    old = np.exp(-0.5 * t * t)
    new = np.exp(-0.5 * ((t - delta) / gamma) ** 2) + np.exp(-0.5 * ((t + delta) / gamma) ** 2)
    diff = opacity_profile(old, t) - opacity_profile(new, t)
    return float(integrate.trapezoid(diff * diff, t))


def split_optimize(x0=(1.5, 0.6), tol: float = 1e-12, max_iter: int = 4000) -> SplitParams:
    """Minimize :func:`split_objective` over ``(c, gamma)`` with ``delta = c (1 - gamma)``.

    Nelder-Mead on a fixed grid, so repeated calls give identical results.
    """
    t = _grid()

    def f(x):
        c, gamma = x
        if not (0.0 < gamma <= 1.0) or c < 0:
            return 1e3
        return split_objective(gamma, c * (1.0 - gamma), t)

    res = optimize.minimize(f, np.asarray(x0, float), method="Nelder-Mead",
                            options=dict(xatol=tol, fatol=tol, maxiter=max_iter, maxfev=2 * max_iter))
    if not res.success:
        raise MomentSplatError(f"split optimization did not converge: last iterate {res.x.tolist()}")
    c, gamma = (float(v) for v in res.x)
    return SplitParams.from_c_gamma(c, gamma, float(res.fun))
