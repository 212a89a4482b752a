"""Optical-depth bounds from truncated moment sequences.

Given moments of the density in the warped domain and a query point ``eta``
the canonical representation is the ``(n+1)``-atom measure that reproduces
the moments and has one atom at ``eta``. The mass strictly below ``eta``
is a lower bound ``L`` of the optical depth there and adding the atom at
``eta`` gives the upper bound ``U``.

Power moments use the Hankel matrix ``H_ij = m_{i+j}``; trigonometric
moments the Hermitian Toeplitz matrix ``T_jl = c_{j-l}`` with atoms on the
unit circle. Everything is batched over rows so the renderer can issue all
queries of a pass at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import bounds_kernel
from .errors import DegenerateMomentError, UsageError
from .moments import DEFAULT_THETA, POWER, TRIG, MomentVector

DEFAULT_BETA = 0.25
# Bias levels tried in order after the unbiased attempt. The sandwich
# guarantee degrades by about b * m0, so the schedule starts far below the
# level where reconstructions visibly change.
BIAS_SCHEDULE = (6e-9, 6e-8, 6e-7, 6e-6, 6e-5, 6e-4, 6e-3, 6e-2)
PIVOT_TOL = 1e-13
MERGE_TOL = 1e-7
ROOT_IMAG_TOL = 1e-6
ZERO_MASS = 1e-300


@dataclass
class TransmittanceEstimate:
    """Bounds on the optical depth at one (or many) query points."""

    lower: np.ndarray
    upper: np.ndarray
    beta: float = DEFAULT_BETA
    degenerate: np.ndarray | bool = False

    @property
    def tau(self):
        return (1.0 - self.beta) * self.lower + self.beta * self.upper

    @property
    def transmittance(self):
        return np.exp(-self.tau)


@dataclass
class CanonicalMeasure:
    """Support points (``points[0]`` is the query) and their weights."""

    points: np.ndarray
    weights: np.ndarray

    def moments(self, count: int) -> np.ndarray:
        k = np.arange(count)
        return np.sum(self.weights[:, None] * self.points[:, None] ** k, axis=0)


def hilbert_reference(n: int) -> np.ndarray:
    """Hankel matrix of the uniform unit-mass measure on ``[0, 1]``."""
    i = np.arange(n + 1)
    return 1.0 / (i[:, None] + i[None, :] + 1.0)


def hankel_matrices(m: np.ndarray, n: int) -> np.ndarray:
    i = np.arange(n + 1)
    return m[..., i[:, None] + i[None, :]]


def toeplitz_matrices(c: np.ndarray, n: int) -> np.ndarray:
    j = np.arange(n + 1)
    d = j[:, None] - j[None, :]
    full = np.concatenate([np.conj(c[..., :0:-1]), c], axis=-1)  # c_{-n} .. c_n
    return full[..., d + n]


def batched_cholesky(A: np.ndarray, tol: float = 0.0):
    """Lower Cholesky factors of a stack of Hermitian matrices.

    Returns ``(L, ok, min_pivot)``; rows with a pivot ``<= tol * scale`` are
    marked not ok (their factor is garbage) instead of raising.
    """
    A = np.asarray(A)
    B, n, _ = A.shape
    L = np.zeros_like(A)
    ok = np.ones(B, dtype=bool)
    min_pivot = np.full(B, np.inf)
    for j in range(n):
        s = A[:, j, j].real - np.sum(np.abs(L[:, j, :j]) ** 2, axis=-1)
        scale = np.abs(A[:, j, j].real)
        good = s > tol * np.maximum(scale, ZERO_MASS)
        ok &= good
        min_pivot = np.minimum(min_pivot, np.where(scale > 0, s / np.maximum(scale, ZERO_MASS), -np.inf))
        d = np.sqrt(np.where(good, s, 1.0))
        L[:, j, j] = d
        if j + 1 < n:
            rest = A[:, j + 1 :, j] - np.einsum("bik,bk->bi", L[:, j + 1 :, :j], np.conj(L[:, j, :j]))
            L[:, j + 1 :, j] = rest / d[:, None]
    return L, ok, min_pivot


def cholesky_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L L^H x = b`` for stacks of factors and right-hand sides."""
    B, n, _ = L.shape
    y = np.zeros(b.shape, dtype=np.result_type(L, b))
    for i in range(n):
        y[:, i] = (b[:, i] - np.einsum("bk,bk->b", L[:, i, :i], y[:, :i])) / L[:, i, i]
    x = np.zeros_like(y)
    for i in range(n - 1, -1, -1):
        x[:, i] = (y[:, i] - np.einsum("bk,bk->b", np.conj(L[:, i + 1 :, i]), x[:, i + 1 :])) / np.conj(L[:, i, i])
    return x


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of ``sum_k coeffs[..., k] x^k`` (leading coefficient last), batched."""
    B, n1 = coeffs.shape
    n = n1 - 1
    if n == 0:
        return np.zeros((B, 0), dtype=coeffs.dtype)
    if n == 1:
        return (-coeffs[:, 0] / coeffs[:, 1])[:, None]
    C = np.zeros((B, n, n), dtype=np.result_type(coeffs, complex))
    C[:, 1:, :-1] = np.eye(n - 1)
    C[:, :, -1] = -coeffs[:, :n] / coeffs[:, n : n + 1]
    return np.linalg.eigvals(C)


def polynomial_roots_real(coeffs, clamp: bool = False, return_flag: bool = False):
    """All roots of ``sum_k coeffs[k] x^k``, real parts, ascending, with multiplicity.

    A root with imaginary part beyond ``1e-6`` relative raises the flag.
    Closed-form for degree ``<= 2``, companion eigenvalues above.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    n = len(c) - 1
    flag = False
    if n <= 0:
        roots = np.zeros(0)
    elif n == 1:
        roots = np.array([-c[0] / c[1]])
    elif n == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4 * a * cc
        if disc < 0:
            flag = abs(disc) > (ROOT_IMAG_TOL * max(abs(b), 1e-300)) ** 2
            disc = 0.0
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            roots = np.array([0.0, 0.0])
        else:
            roots = np.array([q / a, cc / q])
    else:
        z = _companion_roots(c[None, :])[0]
        flag = bool(np.any(np.abs(z.imag) > ROOT_IMAG_TOL * np.maximum(1.0, np.abs(z))))
        roots = z.real
    roots = np.sort(roots)
    if clamp:
        roots = np.clip(roots, 0.0, 1.0)
    return (roots, flag) if return_flag else roots


def vandermonde_weights(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``sum_i w_i x_i^k = b_k`` (k = 0..n) for each row; Björck–Pereyra."""
    x = np.asarray(x)
    w = np.array(b, dtype=np.result_type(x, b), copy=True)
    n = x.shape[-1] - 1
    for k in range(n):
        for i in range(n, k, -1):
            w[:, i] = w[:, i] - x[:, k] * w[:, i - 1]
    for k in range(n - 1, -1, -1):
        for i in range(k + 1, n + 1):
            w[:, i] = w[:, i] / (x[:, i] - x[:, i - k - 1])
        for i in range(k, n):
            w[:, i] = w[:, i] - w[:, i + 1]
    return w


def _merged_weights(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Scalar fallback for nearly coincident points: merge clusters, solve the reduced system.

    The merged mass goes to the first point of each cluster; the query point
    (index 0) always represents its own cluster.
    """
    m = len(x)
    order = [0] + sorted(range(1, m), key=lambda i: (abs(x[i] - x[0]), i))
    reps: list[int] = []
    owner = np.empty(m, dtype=int)
    for i in order:
        for r in reps:
            if abs(x[i] - x[r]) < MERGE_TOL:
                owner[i] = r
                break
        else:
            reps.append(i)
            owner[i] = i
    pts = x[reps]
    u = len(reps)
    V = pts[None, :] ** np.arange(u)[:, None]
    sub = np.linalg.lstsq(V, b[:u], rcond=None)[0] if u < m else np.linalg.solve(V, b[:u])
    w = np.zeros(m, dtype=np.result_type(x, b))
    for j, r in enumerate(reps):
        w[r] = sub[j]
    return w


def _weights(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] == 1:
        return b[:, :1].copy()
    xs = x[:, :, None] - x[:, None, :]
    np.einsum("bii->bi", xs)[:] = np.inf
    tight = np.min(np.abs(xs).reshape(len(x), -1), axis=-1) < MERGE_TOL
    w = np.empty(x.shape, dtype=np.result_type(x, b))
    if np.any(~tight):
        w[~tight] = vandermonde_weights(x[~tight], b[~tight])
    for r in np.flatnonzero(tight):
        w[r] = _merged_weights(x[r], b[r])
    return w


class MomentSolver:
    """Per-row moment state prepared once, queried many times.

    Args:
        kind: ``"power"`` or ``"trig"``.
        n: number of moments beyond the zeroth (power uses ``2n+1`` values).
        moments: array ``(rows, size)``; complex for trig.
        theta: guard angle for trig moments.
    """

    use_kernel = True

    def __init__(self, kind: str, n: int, moments, theta: float = DEFAULT_THETA):
        if kind not in (POWER, TRIG):
            raise UsageError(f"unknown moment kind {kind!r}")
        self.kind, self.n, self.theta = kind, n, theta
        m = np.atleast_2d(np.asarray(moments))
        if m.shape[-1] != MomentVector.size(kind, n):
            raise UsageError("moment rows do not match kind/n")
        self.moments = m
        self.m0 = np.real(m[:, 0]).astype(float)
        self.empty = ~(self.m0 > ZERO_MASS)
        rows = len(m)
        size = n + 1
        dtype = float if kind == POWER else complex
        self.matrix = np.zeros((rows, size, size), dtype=dtype)
        self.bias = np.full(rows, np.nan)
        self.degenerate = np.zeros(rows, dtype=bool)
        live = np.flatnonzero(~self.empty)
        if kind == POWER:
            raw = hankel_matrices(m[live].real.astype(float), n)
            ref = hilbert_reference(n)[None] * self.m0[live, None, None]
        else:
            raw = toeplitz_matrices(m[live].astype(complex), n)
            ref = np.eye(size)[None] * self.m0[live, None, None]
        _, ok, _ = batched_cholesky(raw, PIVOT_TOL)
        self._accept(live[ok], raw[ok], 0.0)
        pending = np.flatnonzero(~ok)

        for b in BIAS_SCHEDULE:
            if len(pending) == 0:
                break
            A = (1.0 - b) * raw[pending] + b * ref[pending]
            _, ok, _ = batched_cholesky(A, PIVOT_TOL)
            self._accept(live[pending[ok]], A[ok], b)
            pending = pending[~ok]
        if len(pending):
            self.degenerate[live[pending]] = True
        self._active = ~self.empty & ~self.degenerate
        self.factor = np.zeros_like(self.matrix)
        idx = np.flatnonzero(self._active)
        if len(idx):
            self.factor[idx] = batched_cholesky(self.matrix[idx])[0]
        # column 0 of the Hankel / Toeplitz matrix holds the (biased) moments 0..n
        self.target = np.ascontiguousarray(self.matrix[:, :, 0], dtype=complex)
        self._cfactor = np.ascontiguousarray(self.factor, dtype=complex)

    def _accept(self, rows, A, b):
        self.matrix[rows] = A
        self.bias[rows] = b

    def _key(self, pts):
        """Position along the ordered domain: ``x`` for power, phase for trig."""
        if self.kind == POWER:
            return np.real(pts)
        lo = -0.5 * self.theta
        return np.mod(np.angle(pts) - lo, 2.0 * math.pi) + lo

    @property
    def degenerate_count(self) -> int:
        return int(np.count_nonzero(self.degenerate))

    def phase(self, eta):
        return (2.0 * math.pi - self.theta) * np.asarray(eta, dtype=float)

    def _support(self, rows: np.ndarray, eta: np.ndarray):
        """Query point plus kernel roots, and the target moments, for active rows."""
        n = self.n
        k = np.arange(n + 1)
        if self.kind == POWER:
            zeta = eta[:, None] ** k
            q = cholesky_solve(self.factor[rows], zeta)
            roots = _companion_roots(q)
            pts = np.concatenate([eta[:, None], roots.real], axis=-1)
            target = self.target[rows].real
        else:
            z0 = np.exp(1j * self.phase(eta))
            zeta = z0[:, None] ** k
            q = cholesky_solve(self.factor[rows], zeta)
            roots = _companion_roots(np.conj(q))
            roots = roots / np.maximum(np.abs(roots), ZERO_MASS)
            pts = np.concatenate([z0[:, None], roots], axis=-1)
            target = self.target[rows]
        return pts, target

    def canonical(self, row: int, eta: float) -> CanonicalMeasure:
        if not self._active[row]:
            raise DegenerateMomentError("row has no canonical representation")
        pts, target = self._support(np.array([row]), np.array([float(eta)]))
        w = _weights(pts, target)
        if self.kind == POWER:
            return CanonicalMeasure(pts[0].real, w[0].real)
        return CanonicalMeasure(pts[0], w[0].real)

    def bounds(self, rows, eta):
        """Lower/upper optical depth for query pairs ``(row, eta)`` (1D arrays)."""
        rows = np.asarray(rows, dtype=int).ravel()
        eta = np.broadcast_to(np.asarray(eta, dtype=float), rows.shape).ravel()
        lower = np.zeros(rows.shape)
        upper = np.zeros(rows.shape)
        m0 = self.m0[rows]
        deg = self.degenerate[rows]
        lower[deg] = m0[deg]
        upper[deg] = m0[deg]
        sel = np.flatnonzero(self._active[rows])
        if len(sel) == 0:
            return lower, upper
        r, e = rows[sel], eta[sel]
        if self.use_kernel:
            lo_k, up_k, flag = bounds_kernel(self._cfactor, self.target, self.m0, r, e, self.kind == TRIG,
                                             float(self.theta), MERGE_TOL)
            lower[sel], upper[sel] = lo_k, up_k
            sel, r, e = sel[flag], r[flag], e[flag]
            if len(sel) == 0:
                return lower, upper
        pts, target = self._support(r, e)
        w = _weights(pts, target).real
        keys = self._key(pts)
        below = keys[:, 1:] < keys[:, :1]
        low = np.sum(np.where(below, w[:, 1:], 0.0), axis=-1)
        up = low + w[:, 0]
        mm = m0[sel]
        low = np.clip(low, 0.0, mm)
        up = np.clip(up, low, mm)
        lower[sel] = low
        upper[sel] = up
        return lower, upper

    def estimate(self, rows, eta, beta: float = DEFAULT_BETA) -> TransmittanceEstimate:
        rows = np.asarray(rows, dtype=int).ravel()
        lo, up = self.bounds(rows, eta)
        return TransmittanceEstimate(lo, up, beta, self.degenerate[rows])


def _as_rows(m, kind, n):
    if isinstance(m, MomentVector):
        if m.kind != kind:
            raise UsageError(f"expected {kind} moments, got {m.kind}")
        return m.values, m.n, m.theta
    arr = np.asarray(m)
    if n is None:
        n = (arr.shape[-1] - 1) // 2 if kind == POWER else arr.shape[-1] - 1
    return arr, n, DEFAULT_THETA


def _reconstruct(kind, m, eta, beta, n, theta):
    vals, n, th = _as_rows(m, kind, n)
    theta = th if theta is None else theta
    if vals.ndim != 1:
        raise UsageError("reconstruct_* expects one moment vector; use MomentSolver for batches")
    solver = MomentSolver(kind, n, vals[None, :], theta)
    eta_arr = np.asarray(eta, dtype=float)
    if np.any((eta_arr < 0) | (eta_arr > 1)):
        raise UsageError("eta must lie in [0, 1]")
    lo, up = solver.bounds(np.zeros(eta_arr.size, dtype=int), eta_arr.ravel())
    if eta_arr.ndim == 0:
        lo, up = float(lo[0]), float(up[0])
    else:
        lo, up = lo.reshape(eta_arr.shape), up.reshape(eta_arr.shape)
    return TransmittanceEstimate(lo, up, beta, bool(solver.degenerate[0]))


def reconstruct_power(m, eta, beta: float = DEFAULT_BETA, n: int | None = None) -> TransmittanceEstimate:
    """Bounds from ``2n+1`` power moments at warped distance(s) ``eta``."""
    return _reconstruct(POWER, m, eta, beta, n, None)


def reconstruct_trig(m, eta, beta: float = DEFAULT_BETA, n: int | None = None, theta: float | None = None) -> TransmittanceEstimate:
    """Bounds from ``n+1`` trigonometric moments at warped distance(s) ``eta``."""
    return _reconstruct(TRIG, m, eta, beta, n, theta)


def canonical_measure(m: MomentVector, eta: float) -> CanonicalMeasure:
    solver = MomentSolver(m.kind, m.n, np.asarray(m.values)[None, :], m.theta)
    return solver.canonical(0, eta)
