"""Compiled per-query kernels for bound reconstruction.

The numpy path in :mod:`momentsplat.bounds` is the reference; these loops do
the same arithmetic one query at a time so that no batched LAPACK call is
needed. Queries the kernel cannot finish (nearly coincident support points,
root iteration not converged) are flagged for the reference path.
"""

import math

import numpy as np
from numba import njit

MAX_ITER = 80


@njit(cache=True)
def _poly_eval(c, z):
    n = c.shape[0] - 1
    p = c[n]
    dp = 0.0j
    for k in range(n - 1, -1, -1):
        dp = dp * z + p
        p = p * z + c[k]
    return p, dp


@njit(cache=True)
def poly_roots(c, out):
    """Aberth-Ehrlich iteration for the roots of ``sum c[k] z^k``; returns convergence."""
    n = c.shape[0] - 1
    lead = c[n]
    if lead == 0:
        return False
    center = -c[n - 1] / (n * lead)
    pc, _ = _poly_eval(c, center)
    radius = abs(pc / lead) ** (1.0 / n)
    if radius < 1e-3:
        radius = 1e-3
    for k in range(n):
        ang = 2.0 * math.pi * k / n + 0.4
        out[k] = center + radius * (math.cos(ang) + 1j * math.sin(ang))
    prev = 1e300
    for _ in range(MAX_ITER):
        biggest = 0.0
        for i in range(n):
            p, dp = _poly_eval(c, out[i])
            if p == 0:
                continue
            ratio = p / dp if dp != 0 else 1e300 + 0j
            s = 0.0j
            for j in range(n):
                if j != i:
                    d = out[i] - out[j]
                    if d != 0:
                        s += 1.0 / d
            denom = 1.0 - ratio * s
            step = ratio / denom if denom != 0 else ratio
            out[i] -= step
            rel = abs(step) / max(1.0, abs(out[i]))
            if rel > biggest:
                biggest = rel
        # converged, or stalled at rounding level
        if biggest < 1e-13 or (biggest < 1e-8 and biggest > 0.5 * prev):
            return True
        prev = biggest
    # accept if the residuals are tiny even though the steps stalled (multiple roots)
    scale = 0.0
    for k in range(n + 1):
        scale += abs(c[k])
    for i in range(n):
        p, _ = _poly_eval(c, out[i])
        if abs(p) > 1e-12 * scale * max(1.0, abs(out[i])) ** n:
            return False
    return True


@njit(cache=True)
def real_roots(c, out):
    """Roots of a real-rooted polynomial by Newton with implicit deflation (Maehly).

    Starting right of the Cauchy bound, each root is approached monotonically
    from above, largest first. Returns False on non-convergence or when the
    polynomial turns out not to be real-rooted.
    """
    n = c.shape[0] - 1
    lead = c[n]
    if lead == 0:
        return False
    bound = 0.0
    for k in range(n):
        v = abs(c[k] / lead)
        if v > bound:
            bound = v
    x = 1.0 + bound
    for i in range(n):
        ok = False
        prev = 1e300
        for _ in range(MAX_ITER):
            p = c[n]
            dp = 0.0
            for k in range(n - 1, -1, -1):
                dp = dp * x + p
                p = p * x + c[k]
            s = 0.0
            for j in range(i):
                s += 1.0 / (x - out[j])
            denom = dp - p * s
            if denom == 0 or not math.isfinite(denom):
                break
            step = p / denom
            x -= step
            rel = abs(step) / max(1.0, abs(x))
            # converged, or stalled at rounding level
            if rel <= 1e-14 or (rel < 1e-9 and rel > 0.5 * prev):
                ok = True
                break
            prev = rel
        if not ok or not math.isfinite(x):
            return False
        out[i] = x
        if i > 0 and x >= out[i - 1]:
            return False
        x -= 1e-9 * max(1.0, abs(x))
    return True


@njit(cache=True)
def bounds_kernel(factor, target, m0, rows, eta, trig, theta, merge_tol):
    Q = rows.shape[0]
    S = factor.shape[1]
    n = S - 1
    lower = np.zeros(Q)
    upper = np.zeros(Q)
    flag = np.zeros(Q, dtype=np.bool_)
    zeta = np.empty(S, dtype=np.complex128)
    y = np.empty(S, dtype=np.complex128)
    x = np.empty(S, dtype=np.complex128)
    coeff = np.empty(S, dtype=np.complex128)
    roots = np.empty(n, dtype=np.complex128)
    rcoeff = np.empty(S)
    rroots = np.empty(n)
    pts = np.empty(S, dtype=np.complex128)
    w = np.empty(S, dtype=np.complex128)
    keys = np.empty(S)
    two_pi = 2.0 * math.pi
    lo_key = -0.5 * theta
    for q in range(Q):
        r = rows[q]
        L = factor[r]
        if trig:
            phi = (two_pi - theta) * eta[q]
            z0 = math.cos(phi) + 1j * math.sin(phi)
        else:
            z0 = eta[q] + 0j
        zk = 1.0 + 0j
        for k in range(S):
            zeta[k] = zk
            zk *= z0
        for i in range(S):
            acc = zeta[i]
            for k in range(i):
                acc -= L[i, k] * y[k]
            y[i] = acc / L[i, i]
        for i in range(S - 1, -1, -1):
            acc = y[i]
            for k in range(i + 1, S):
                acc -= np.conj(L[k, i]) * x[k]
            x[i] = acc / np.conj(L[i, i])
        for k in range(S):
            coeff[k] = np.conj(x[k]) if trig else x[k]
        if n == 1:
            roots[0] = -coeff[0] / coeff[1]
        elif not trig:
            for k in range(S):
                rcoeff[k] = coeff[k].real
            if not real_roots(rcoeff, rroots):
                flag[q] = True
                continue
            for k in range(n):
                roots[k] = rroots[k]
        elif not poly_roots(coeff, roots):
            flag[q] = True
            continue
        pts[0] = z0
        for i in range(n):
            if trig:
                a = abs(roots[i])
                pts[i + 1] = roots[i] / a if a > 0 else roots[i]
            else:
                pts[i + 1] = roots[i].real + 0j
        tight = False
        for i in range(S):
            for j in range(i + 1, S):
                if abs(pts[i] - pts[j]) < merge_tol:
                    tight = True
        if tight:
            flag[q] = True
            continue
        for k in range(S):
            w[k] = target[r, k]
        for k in range(n):
            for i in range(n, k, -1):
                w[i] = w[i] - pts[k] * w[i - 1]
        for k in range(n - 1, -1, -1):
            for i in range(k + 1, n + 1):
                w[i] = w[i] / (pts[i] - pts[i - k - 1])
            for i in range(k, n):
                w[i] = w[i] - w[i + 1]
        for i in range(S):
            if trig:
                ang = math.atan2(pts[i].imag, pts[i].real)
                keys[i] = ((ang - lo_key) % two_pi) + lo_key
            else:
                keys[i] = pts[i].real
        low = 0.0
        for i in range(1, S):
            if keys[i] < keys[0]:
                low += w[i].real
        up = low + w[0].real
        mass = m0[r]
        low = min(max(low, 0.0), mass)
        up = min(max(up, low), mass)
        lower[q] = low
        upper[q] = up
    return lower, upper, flag
