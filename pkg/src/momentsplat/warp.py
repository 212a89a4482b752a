"""Distance warping into the unit interval.

``f(t) = f_lam(2t)`` with the power-transform family

    f_lam(x) = |lam - 1| / lam * ((x / |lam - 1| + 1)**lam - 1)

and limits ``log1p(x)`` at ``lam = 0`` and ``x`` at ``lam = 1``. The warp is
``g(t) = (f(t) - f(t_n)) / (f(t_f) - f(t_n))``. With ``t_f = inf`` the
normalizer uses ``lim f_lam = -|lam - 1| / lam``, finite for ``lam < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FAR_SENTINEL
from .errors import ConfigError

DEFAULT_LAMBDA = -1.5
DEFAULT_NEAR = 0.01


def power_transform(x, lam: float):
    x = np.asarray(x, dtype=float)
    if lam == 1.0:
        return x.copy()
    if lam == 0.0:
        return np.log1p(x)
    a = abs(lam - 1.0)
    return a / lam * ((x / a + 1.0) ** lam - 1.0)


def power_transform_deriv(x, lam: float):
    x = np.asarray(x, dtype=float)
    if lam == 1.0:
        return np.ones_like(x)
    if lam == 0.0:
        return 1.0 / (1.0 + x)
    a = abs(lam - 1.0)
    return (x / a + 1.0) ** (lam - 1.0)


def power_transform_limit(lam: float) -> float:
    """``lim_{x -> inf} f_lam(x)``; infinite for ``lam >= 0``."""
    if lam >= 0:
        return math.inf
    return -abs(lam - 1.0) / lam


def power_transform_inverse(y, lam: float):
    y = np.asarray(y, dtype=float)
    if lam == 1.0:
        return y.copy()
    if lam == 0.0:
        return np.expm1(y)
    a = abs(lam - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return a * ((1.0 + lam * y / a) ** (1.0 / lam) - 1.0)


@dataclass(frozen=True)
class WarpConfig:
    lam: float = DEFAULT_LAMBDA
    near: float = DEFAULT_NEAR
    far: float = FAR_SENTINEL

    def __post_init__(self):
        if not (self.far > self.near):
            raise ConfigError(f"far ({self.far}) must exceed near ({self.near})")
        if self.near < 0:
            raise ConfigError("near must be >= 0")
        if math.isinf(self.far) and self.lam >= 0:
            raise ConfigError("an unbounded far plane needs lambda < 0")
        if not (self.f_far > self.f_near):
            raise ConfigError("warp is not strictly increasing on [near, far]")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.far)

    def f(self, t):
        return power_transform(2.0 * np.asarray(t, dtype=float), self.lam)

    @property
    def f_near(self) -> float:
        return float(self.f(self.near))

    @property
    def f_far(self) -> float:
        if self.unbounded:
            return power_transform_limit(self.lam)
        return float(self.f(self.far))

    @property
    def span(self) -> float:
        return self.f_far - self.f_near


def warp(t, cfg: WarpConfig):
    """Warped distance in [0, 1] for ``t`` in ``[near, far]`` (no clamping)."""
    return (cfg.f(t) - cfg.f_near) / cfg.span


def warp_deriv(t, cfg: WarpConfig):
    return 2.0 * power_transform_deriv(2.0 * np.asarray(t, dtype=float), cfg.lam) / cfg.span


def warp_second_deriv(t, cfg: WarpConfig):
    lam = cfg.lam
    x = 2.0 * np.asarray(t, dtype=float)
    if lam == 1.0:
        return np.zeros_like(x)
    if lam == 0.0:
        return -4.0 / (1.0 + x) ** 2 / cfg.span
    a = abs(lam - 1.0)
    return 4.0 * (lam - 1.0) / a * (x / a + 1.0) ** (lam - 2.0) / cfg.span


def unwarp(eta, cfg: WarpConfig):
    """Inverse of :func:`warp`; ``eta = 1`` maps to ``far`` (``inf`` when unbounded)."""
    eta = np.asarray(eta, dtype=float)
    y = cfg.f_near + eta * cfg.span
    with np.errstate(divide="ignore", invalid="ignore"):
        t = 0.5 * power_transform_inverse(y, cfg.lam)
    if cfg.unbounded:
        t = np.where(eta >= 1.0, np.inf, t)
    return t
