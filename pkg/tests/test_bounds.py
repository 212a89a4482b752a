import numpy as np
import pytest

from momentsplat.bounds import (MomentSolver, canonical_measure, polynomial_roots_real, reconstruct_power,
                                reconstruct_trig, vandermonde_weights)
from momentsplat.core import Gaussian1D
from momentsplat.errors import UsageError
from momentsplat.moments import MomentVector, moment_vector
from momentsplat.oracle import exact_optical_depth, oracle_moments
from momentsplat.warp import WarpConfig, unwarp


def test_zero_moments_power():
    est = reconstruct_power(np.zeros(9), np.linspace(0, 1, 5))
    np.testing.assert_array_equal(est.lower, 0.0)
    np.testing.assert_array_equal(est.upper, 0.0)
    np.testing.assert_array_equal(est.transmittance, 1.0)


def test_zero_moments_trig():
    est = reconstruct_trig(np.zeros(6, dtype=complex), 0.3)
    assert est.transmittance == 1.0


@pytest.mark.parametrize("kind", ["power", "trig"])
def test_atoms_split_exactly(kind):
    theta = np.pi / 5
    x = np.array([0.15, 0.5, 0.8])
    w = np.array([0.7, 1.1, 0.4])
    if kind == "power":
        m = np.array([np.sum(w * x**k) for k in range(9)])
        n = 4
    else:
        z = np.exp(1j * (2 * np.pi - theta) * x)
        m = np.array([np.sum(w * z**k) for k in range(6)])
        n = 5
    lo, up = MomentSolver(kind, n, m[None], theta).bounds(np.zeros(3, dtype=int), x)
    below = np.cumsum(w) - w
    np.testing.assert_allclose(lo, below, atol=1e-5)
    np.testing.assert_allclose(up, below + w, atol=1e-5)


def test_sandwich_on_mixture():
    cfg = WarpConfig()
    g1s = [Gaussian1D(0.8, 2.0, 0.3), Gaussian1D(1.5, 4.0, 0.6)]
    m = oracle_moments(g1s, cfg, 4)
    eta = np.linspace(0.0, 1.0, 33)
    est = reconstruct_power(m, eta)
    tau = exact_optical_depth(g1s, unwarp(eta, cfg), cfg.near)
    tol = 1e-6 * (1 + m[0])
    assert np.all(est.lower <= tau + tol)
    assert np.all(tau <= est.upper + tol)
    assert np.all(np.diff(est.lower) >= -1e-9)


def test_canonical_measure_reproduces_moments():
    mv = moment_vector(Gaussian1D(1.0, 3.0, 0.4), WarpConfig(), "power", 4)
    cm = canonical_measure(mv, 0.6)
    assert cm.points[0] == pytest.approx(0.6)
    np.testing.assert_allclose(cm.moments(5), mv.values[:5], rtol=1e-6, atol=1e-9)


def test_roots_closed_form():
    np.testing.assert_allclose(polynomial_roots_real([0.25, -1.0, 1.0]), [0.5, 0.5])
    np.testing.assert_allclose(polynomial_roots_real([0.0, -1.0, 1.0]), [0.0, 1.0])


def test_roots_companion():
    r = np.array([0.1, 0.3, 0.7, 0.9])
    c = np.poly(r)[::-1]
    np.testing.assert_allclose(polynomial_roots_real(c), r, atol=1e-12)
    _, flag = polynomial_roots_real([1.0, 0.0, 0.0, 1.0], return_flag=True)
    assert flag


def test_vandermonde_weights():
    x = np.array([[0.1, 0.4, 0.9]])
    w = np.array([[2.0, 0.5, 1.5]])
    b = np.array([[np.sum(w * x**k) for k in range(3)]])
    np.testing.assert_allclose(vandermonde_weights(x, b), w, rtol=1e-12)


def test_kernel_agrees_with_reference_path():
    cfg = WarpConfig()
    m = np.stack([moment_vector(Gaussian1D(a, mu, s), cfg, "power", 4).values
                  for a, mu, s in ((1.0, 2.0, 0.3), (0.4, 5.0, 1.0), (2.0, 1.0, 0.1))])
    rows = np.repeat(np.arange(3), 20)
    eta = np.tile(np.linspace(0.01, 0.99, 20), 3)
    solver = MomentSolver("power", 4, m)
    lo_k, up_k = solver.bounds(rows, eta)
    solver.use_kernel = False
    lo_r, up_r = solver.bounds(rows, eta)
    np.testing.assert_allclose(lo_k, lo_r, atol=1e-8)
    np.testing.assert_allclose(up_k, up_r, atol=1e-8)


def test_bad_inputs():
    with pytest.raises(UsageError):
        reconstruct_power(np.zeros(9), 1.5)
    with pytest.raises(UsageError):
        MomentSolver("power", 4, np.zeros((1, 7)))
    with pytest.raises(UsageError):
        reconstruct_trig(MomentVector.zeros("power", 4), 0.5)
