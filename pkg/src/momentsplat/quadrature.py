"""Per-particle quadrature of the volume rendering integral.

Each particle's share of a pixel is integrated over ``N`` intervals whose
edges follow the particle's own density (inverse-transform sampling of a
normal with stddev ``kappa * s``). The visibility of an interval comes from
the reconstructed optical depth at its edges, and the particle's share of
the total density in the interval is ``sigma_i / sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .core import Gaussian1D

SQRT_PI_2 = math.sqrt(math.pi / 2.0)
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QuadratureConfig:
    """Interval layout and clamps.

    Attributes:
        N: number of intervals per particle.
        kappa: spread of the edges in particle stddevs.
        epsilon: lower clamp on the accumulated opacity when rescaling.
        delta_min: intervals shorter than this are skipped (world units).
        sigma_min: floor on the recovered interval density.
    """

    N: int = 5
    kappa: float = 3.0
    epsilon: float = 1e-4
    delta_min: float = 1e-9
    sigma_min: float = 1e-12

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.kappa >= 1.0:
            raise ValueError("kappa must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def abscissae(self) -> np.ndarray:
        """Standard-normal quantiles at ``(j - 1/2) / (N + 1)``, ``j = 1..N+1``."""
        j = np.arange(1, self.N + 2)
        return special.ndtri((j - 0.5) / (self.N + 1))


def sample_intervals(g1, near: float, far: float, cfg: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Interval edges ``m + kappa s x_j`` clamped to ``[near, far]``; shape ``(..., N+1)``."""
    _, m, s = (np.asarray(v, dtype=float) for v in g1)
    t = m[..., None] + cfg.kappa * s[..., None] * cfg.abscissae
    return np.clip(t, near, far)


def interval_density(tau_lo, tau_hi, delta):
    """Mean extinction over an interval from its optical-depth increment, floored at 0."""
    return np.maximum((np.asarray(tau_hi) - np.asarray(tau_lo)) / np.asarray(delta), 0.0)


def particle_interval_depth(g1, t_lo, t_hi):
    """Optical depth of one particle between ``t_lo`` and ``t_hi`` (erf difference)."""
    a, m, s = (np.asarray(v, dtype=float) for v in g1)
    lo = (np.asarray(t_lo) - m[..., None]) / (SQRT2 * s[..., None])
    hi = (np.asarray(t_hi) - m[..., None]) / (SQRT2 * s[..., None])
    diff = np.where(lo >= 0, special.erfc(lo) - special.erfc(hi),
                    np.where(hi <= 0, special.erfc(-hi) - special.erfc(-lo), special.erf(hi) - special.erf(lo)))
    return (a * s * SQRT_PI_2)[..., None] * diff


def interval_terms(g1, edges, tau, cfg: QuadratureConfig = QuadratureConfig()):
    """Share and penalty of particle(s) ``g1`` given edge distances and optical depths.

    Args:
        g1: ``(amplitude, mean, stddev)`` arrays of shape ``B``.
        edges: ``(B, N+1)`` distances.
        tau: ``(B, N+1)`` reconstructed optical depth at the edges.

    Returns:
        ``(share, penalty)`` each of shape ``B``. ``share`` multiplies the
        particle colour; with colour 1 it is the opacity contribution.
    """
    a, m, s = (np.asarray(v, dtype=float) for v in g1)
    edges = np.asarray(edges, dtype=float)
    tau = np.asarray(tau, dtype=float)
    delta = np.diff(edges, axis=-1)
    valid = delta > cfg.delta_min
    dtau = np.diff(tau, axis=-1)
    T = np.exp(-tau)
    vis = np.maximum(T[..., :-1] - T[..., 1:], 0.0)
    safe = np.where(valid, delta, 1.0)
    sigma = np.maximum(interval_density(tau[..., :-1], tau[..., 1:], safe), cfg.sigma_min)
    mid = 0.5 * (edges[..., :-1] + edges[..., 1:])
    z = (mid - m[..., None]) / s[..., None]
    sigma_i = a[..., None] * np.exp(-0.5 * z * z)
    ratio = np.clip(sigma_i / sigma, 0.0, 1.0)
    share = np.sum(np.where(valid, vis * ratio, 0.0), axis=-1)
    tau_ij = particle_interval_depth((a, m, s), edges[..., :-1], edges[..., 1:])
    penalty = np.sum(np.where(valid, np.maximum(0.0, tau_ij - dtau) ** 2, 0.0), axis=-1)
    return share, penalty


@dataclass
class PixelAccumulator:
    """Running sums of one pixel (or a stack of pixels)."""

    radiance: np.ndarray = field(default_factory=lambda: np.zeros(3))
    opacity: np.ndarray | float = 0.0
    penalty: np.ndarray | float = 0.0

    def add(self, rgb, opacity, penalty):
        self.radiance = self.radiance + np.asarray(rgb, dtype=float)
        self.opacity = self.opacity + opacity
        self.penalty = self.penalty + penalty
        return self


def gaussian_contribution(color, g1: Gaussian1D, tau_fn: Callable, near: float, far: float,
                          cfg: QuadratureConfig = QuadratureConfig()):
    """``(rgb, opacity, penalty)`` of one particle on one ray.

    ``tau_fn`` maps an array of distances to the reconstructed optical depth
    of the whole ray (moment bounds in the renderer, the exact depth in
    tests).
    """
    edges = sample_intervals(g1, near, far, cfg)
    tau = np.asarray(tau_fn(edges), dtype=float)
    share, penalty = interval_terms(tuple(np.atleast_1d(v) for v in g1), edges[None], tau[None], cfg)
    return float(share[0]) * np.asarray(color, dtype=float), float(share[0]), float(penalty[0])


def rescale_radiance(radiance, opacity, m0, background, epsilon: float = 1e-4):
    """Normalize accumulated radiance so the pixel's total opacity is ``1 - exp(-m0)``."""
    radiance = np.asarray(radiance, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    alpha = -np.expm1(-m0)
    scale = alpha / np.maximum(epsilon, np.asarray(opacity, dtype=float))
    return scale[..., None] * radiance + np.exp(-m0)[..., None] * np.asarray(background, dtype=float)
