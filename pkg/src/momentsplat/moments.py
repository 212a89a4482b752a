"""Analytic density moments of ray-restricted Gaussians in the warped domain.

Each particle's contribution is obtained by linearizing the warp at the
particle mean, ``u_t = g(m) + g'(m) (t - m)``. Power moments then follow a
three-term recurrence; trigonometric moments have a closed form with a
complex error function evaluated by a first-order expansion.

All functions accept scalars or broadcastable arrays for the particle
parameters ``(amplitude, mean, stddev)``; the moment index is appended as the
last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import integrate, special

from .core import Gaussian1D
from .errors import NumericOverflowError, UsageError
from .warp import WarpConfig, warp, warp_deriv

SQRT_PI_2 = math.sqrt(math.pi / 2.0)
SQRT2 = math.sqrt(2.0)
TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
DEFAULT_THETA = math.pi / 5.0
DEFAULT_POWER_N = 4
LOWER_BOUND_C0 = SQRT_PI_2 * math.erf(1.0)

POWER = "power"
TRIG = "trig"


@dataclass
class MomentVector:
    """Accumulated moments of one ray (or a stack of rays).

    ``values`` holds ``2n+1`` reals for power moments, or ``n+1`` complex
    numbers for trigonometric moments where entry 0 is the real optical
    depth. Leading axes, if any, index pixels.
    """

    kind: str
    n: int
    values: np.ndarray
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if self.kind not in (POWER, TRIG):
            raise UsageError(f"unknown moment kind {self.kind!r}")
        dtype = float if self.kind == POWER else complex
        self.values = np.asarray(self.values, dtype=dtype)
        if self.values.shape[-1] != self.size(self.kind, self.n):
            raise UsageError("moment array does not match kind/n")

    @staticmethod
    def size(kind: str, n: int) -> int:
        return 2 * n + 1 if kind == POWER else n + 1

    @classmethod
    def zeros(cls, kind: str, n: int, theta: float = DEFAULT_THETA, shape=()):
        dtype = float if kind == POWER else complex
        return cls(kind, n, np.zeros(tuple(shape) + (cls.size(kind, n),), dtype=dtype), theta)

    @property
    def m0(self):
        return np.real(self.values[..., 0])

    def compatible(self, other: "MomentVector") -> bool:
        return self.kind == other.kind and self.n == other.n and (self.kind == POWER or self.theta == other.theta)

    def real_view(self) -> np.ndarray:
        """Flattened real layout ``[m0, re1, im1, ...]`` for trig; identity for power."""
        if self.kind == POWER:
            return self.values
        v = self.values
        parts = [v[..., :1].real]
        for k in range(1, self.n + 1):
            parts += [v[..., k : k + 1].real, v[..., k : k + 1].imag]
        return np.concatenate(parts, axis=-1)

    @classmethod
    def from_real_view(cls, kind, n, data, theta=DEFAULT_THETA):
        data = np.asarray(data, dtype=float)
        if kind == POWER:
            return cls(kind, n, data, theta)
        vals = np.empty(data.shape[:-1] + (n + 1,), dtype=complex)
        vals[..., 0] = data[..., 0]
        vals[..., 1:] = data[..., 1::2] + 1j * data[..., 2::2]
        return cls(kind, n, vals, theta)


def _params(g1):
    if isinstance(g1, Gaussian1D):
        a, m, s = g1
    else:
        a, m, s = g1
    return (np.asarray(a, dtype=float), np.asarray(m, dtype=float), np.asarray(s, dtype=float))


def _check_finite(arr, k):
    if not np.all(np.isfinite(arr)):
        raise NumericOverflowError(f"non-finite moment at k={k}", k=k)


def _mass_term(a, m, s, cfg: WarpConfig):
    """``erf(v_f) - erf(v_n)`` for the real Gaussian integral, cancellation-free."""
    bn = (cfg.near - m) / (SQRT2 * s)
    if cfg.unbounded:
        return special.erfc(bn)
    bf = (cfg.far - m) / (SQRT2 * s)
    # erf(bf) - erf(bn) rewritten with erfc on the side where both are large.
    return np.where(
        bn >= 0,
        special.erfc(bn) - special.erfc(bf),
        np.where(bf <= 0, special.erfc(-bf) - special.erfc(-bn), special.erf(bf) - special.erf(bn)),
    )


def zeroth_moment(g1, cfg: WarpConfig):
    """Total optical depth of a particle over ``[near, far]`` (no approximation)."""
    a, m, s = _params(g1)
    return a * s * SQRT_PI_2 * _mass_term(a, m, s, cfg)


def power_moments_1d(g1, cfg: WarpConfig, n: int = DEFAULT_POWER_N) -> np.ndarray:
    """Warped power moments ``k = 0..2n`` of one particle (or a batch).

    Uses the recurrence ``m_k = g m_{k-1} + beta (k-1) m_{k-2} - B(k)`` with
    ``beta = g'^2 s^2`` and boundary term
    ``B(k) = g' a s^2 [u_t^{k-1} exp(-(t-m)^2 / (2 s^2))]_{near}^{far}``.
    """
    a, m, s = _params(g1)
    g = warp(m, cfg)
    gp = warp_deriv(m, cfg)
    var = s * s
    beta = gp * gp * var
    bn = (cfg.near - m) / (SQRT2 * s)
    un = g + gp * (cfg.near - m)
    en = np.exp(-bn * bn)
    if not cfg.unbounded:
        bf = (cfg.far - m) / (SQRT2 * s)
        uf = g + gp * (cfg.far - m)
        ef = np.exp(-bf * bf)
    scale = gp * a * var

    out = np.empty(np.broadcast(a, m, s).shape + (2 * n + 1,))
    prev2 = np.zeros(out.shape[:-1])
    prev = a * s * SQRT_PI_2 * _mass_term(a, m, s, cfg)
    out[..., 0] = prev
    _check_finite(prev, 0)
    un_pow = np.ones_like(un)
    uf_pow = np.ones_like(un) if not cfg.unbounded else None
    for k in range(1, 2 * n + 1):
        boundary = -scale * un_pow * en
        if not cfg.unbounded:
            boundary = boundary + scale * uf_pow * ef
            uf_pow = uf_pow * uf
        cur = g * prev + beta * (k - 1) * prev2 - boundary
        _check_finite(cur, k)
        out[..., k] = cur
        prev2, prev = prev, cur
        un_pow = un_pow * un
    return out


def complex_erf_taylor(a, b):
    """``erf(a + ib)`` to first order in ``b``: ``erf(a) + i b (2/sqrt(pi)) exp(-a^2)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return special.erf(a) + 1j * b * TWO_OVER_SQRT_PI * np.exp(-a * a)


def _one_minus_erf_taylor(a, b):
    # 1 - erf(a + ib) with erfc for the real part (no cancellation for a >> 0).
    return special.erfc(a) - 1j * b * TWO_OVER_SQRT_PI * np.exp(-a * a)


def trig_moments_1d(g1, cfg: WarpConfig, n: int, theta: float = DEFAULT_THETA) -> np.ndarray:
    """Trigonometric moments ``k = 0..n`` of one particle (or a batch), complex."""
    a, m, s = _params(g1)
    g = warp(m, cfg)
    gp = warp_deriv(m, cfg)
    bn = (cfg.near - m) / (SQRT2 * s)
    shape = np.broadcast(a, m, s).shape
    out = np.empty(shape + (n + 1,), dtype=complex)
    out[..., 0] = a * s * SQRT_PI_2 * _mass_term(a, m, s, cfg)
    _check_finite(out[..., 0], 0)
    for k in range(1, n + 1):
        alpha = k * (2.0 * math.pi - theta)
        beta = alpha * gp
        b = s * beta / SQRT2
        # v_n = bn - i b
        tail = _one_minus_erf_taylor(bn, -b)
        if not cfg.unbounded:
            bf = (cfg.far - m) / (SQRT2 * s)
            tail = tail - _one_minus_erf_taylor(bf, -b)
        phase = np.exp(1j * alpha * g - 0.5 * (s * beta) ** 2)
        val = a * SQRT_PI_2 * s * phase * tail
        _check_finite(val, k)
        out[..., k] = val
    return out


def particle_moments(g1, cfg: WarpConfig, kind: str, n: int, theta: float = DEFAULT_THETA) -> np.ndarray:
    if kind == POWER:
        return power_moments_1d(g1, cfg, n)
    if kind == TRIG:
        return trig_moments_1d(g1, cfg, n, theta)
    raise UsageError(f"unknown moment kind {kind!r}")


def mboit_surface_moments(g1, cfg: WarpConfig, n: int, kind: str = POWER, theta: float = DEFAULT_THETA) -> MomentVector:
    """Thin-surface moments: the particle collapsed onto depth ``g(m)``.

    The surface weight ``-log(1 - alpha)`` with ``alpha = 1 - exp(-tau)`` is
    the particle's optical depth itself. For the trigonometric variant the
    surface depth ``z = 2 g(m) - 1`` in ``[-1, 1]`` enters through the phase
    ``k (2 pi - theta) (z + 1) / 2``.
    """
    tau = zeroth_moment(g1, cfg)
    _, m, _ = _params(g1)
    z = warp(m, cfg)
    if kind == POWER:
        k = np.arange(2 * n + 1)
        vals = tau[..., None] * z[..., None] ** k
    else:
        k = np.arange(n + 1)
        depth = ((2.0 * z - 1.0) + 1.0) / 2.0
        vals = tau[..., None] * np.exp(1j * (2.0 * math.pi - theta) * k * depth[..., None])
    return MomentVector(kind, n, vals, theta)


def moment_vector(g1, cfg: WarpConfig, kind: str, n: int, theta: float = DEFAULT_THETA) -> MomentVector:
    return MomentVector(kind, n, particle_moments(g1, cfg, kind, n, theta), theta)


def kahan_sum(arrays: Iterable[np.ndarray], shape=None, dtype=float) -> np.ndarray:
    """Compensated elementwise sum, in the order given."""
    total = None
    comp = None
    for x in arrays:
        x = np.asarray(x)
        if total is None:
            total = np.zeros(np.shape(x) if shape is None else shape, dtype=np.result_type(x, dtype))
            comp = np.zeros_like(total)
        y = x - comp
        t = total + y
        comp = (t - total) - y
        total = t
    if total is None:
        return np.zeros(() if shape is None else shape, dtype=dtype)
    return total


def accumulate(per_gaussian: list, deterministic: bool = True, kind: Optional[str] = None, n: Optional[int] = None,
               theta: float = DEFAULT_THETA) -> MomentVector:
    """Sum per-particle moment vectors.

    In deterministic mode the vectors are first put into a canonical order
    (lexicographic on their real layout) and then summed with Kahan
    compensation, so any permutation of the input gives a bitwise-identical
    result. Otherwise a plain ``np.sum`` reduction is used.
    """
    items = list(per_gaussian)
    if not items:
        if kind is None or n is None:
            kind, n = POWER, DEFAULT_POWER_N
        return MomentVector.zeros(kind, n, theta)
    first = items[0]
    for other in items[1:]:
        if not first.compatible(other):
            raise UsageError("cannot accumulate moment vectors of different kind/n/theta")
    if first.values.ndim != 1:
        raise UsageError("accumulate expects single-ray moment vectors")
    if len(items) == 1:
        return MomentVector(first.kind, first.n, first.values.copy(), first.theta)
    if deterministic:
        rows = [v.real_view() for v in items]
        order = sorted(range(len(rows)), key=lambda i: tuple(rows[i].tolist()))
        total = kahan_sum(rows[i] for i in order)
        return MomentVector.from_real_view(first.kind, first.n, total, first.theta)
    total = np.sum([v.values for v in items], axis=0)
    return MomentVector(first.kind, first.n, total, first.theta)


def raw_moment_lower_bound_check(g1, k: int, near: float = 0.0, far: float = math.inf) -> Optional[bool]:
    """Check ``m_k >= c0 * a * m^k * s`` for the unwarped raw moment.

    Returns ``None`` when the preconditions ``near <= m`` and
    ``far >= m + sqrt(2) s`` do not hold.
    """
    a, m, s = (float(v) for v in _params(g1))
    if not (near <= m and far >= m + SQRT2 * s):
        return None
    if a == 0.0:
        return True
    lo, hi = max(near, m - 40 * s), min(far, m + 40 * s)
    val, _ = integrate.quad(lambda t: t**k * math.exp(-0.5 * ((t - m) / s) ** 2), lo, hi,
                            points=[m], epsabs=0.0, epsrel=1e-13, limit=200)
    return a * val >= LOWER_BOUND_C0 * a * m**k * s * (1.0 - 1e-9)
