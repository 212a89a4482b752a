import math

import numpy as np
import pytest
from scipy import special

from momentsplat.core import Gaussian1D
from momentsplat.errors import NumericOverflowError
from momentsplat.moments import (MomentVector, accumulate, complex_erf_taylor, kahan_sum, mboit_surface_moments,
                                 moment_vector, power_moments_1d, raw_moment_lower_bound_check, trig_moments_1d,
                                 zeroth_moment)
from momentsplat.oracle import exact_optical_depth, oracle_linearized_moments, oracle_moments
from momentsplat.warp import WarpConfig, warp

CFG = WarpConfig()


def test_zero_density_gives_zero_moments():
    g = Gaussian1D(0.0, 3.0, 0.5)
    assert not np.any(power_moments_1d(g, CFG, 4))
    assert not np.any(trig_moments_1d(g, CFG, 5))


def test_zeroth_moment_matches_closed_form():
    g = Gaussian1D(1.0, 5.0, 0.5)
    ref = float(exact_optical_depth([g], math.inf, CFG.near))
    np.testing.assert_allclose(zeroth_moment(g, CFG), ref, rtol=1e-12)
    np.testing.assert_allclose(power_moments_1d(g, CFG, 4)[0], ref, rtol=1e-12)
    np.testing.assert_allclose(trig_moments_1d(g, CFG, 5)[0].real, ref, rtol=1e-12)


def test_power_moments_match_linearized_quadrature():
    g = Gaussian1D(0.7, 3.0, 0.3)
    np.testing.assert_allclose(power_moments_1d(g, CFG, 4), oracle_linearized_moments(g, CFG, 4), rtol=1e-8)


def test_trig_moments_match_linearized_quadrature():
    g = Gaussian1D(1.3, 4.0, 0.2)
    got = trig_moments_1d(g, CFG, 5)
    ref = oracle_linearized_moments(g, CFG, 5, kind="trig")
    # first-order erf expansion; the particle sits far from the near bound
    np.testing.assert_allclose(got, ref, rtol=1e-6, atol=1e-9)


def test_linearization_error_shrinks_with_width():
    errs = []
    for s in (0.4, 0.2, 0.1, 0.05):
        g = Gaussian1D(1.0, 5.0, s)
        errs.append(abs(oracle_moments([g], CFG, 4)[2] - power_moments_1d(g, CFG, 4)[2]))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_complex_erf_taylor_real_axis():
    a = np.linspace(-3, 3, 13)
    out = complex_erf_taylor(a, 0.0)
    np.testing.assert_array_equal(out.real, special.erf(a))
    np.testing.assert_array_equal(out.imag, 0.0)


def test_complex_erf_taylor_imaginary_offset():
    out = complex_erf_taylor(0.0, 0.1)
    np.testing.assert_allclose([out.real, out.imag], [0.0, 0.2 / math.sqrt(math.pi)], atol=1e-16)


def test_complex_erf_taylor_error_decays():
    b = 0.3
    a = np.array([0.0, 1.0, 2.0, 3.0])
    errs = np.abs(complex_erf_taylor(a, b) - special.erf(a + 1j * b))
    # second order in b, damped like exp(-a^2) once the Gaussian factor dominates
    assert np.all(errs <= (1.0 + a) * np.exp(-a * a) * b * b)
    assert errs[1] > errs[2] > errs[3]


def test_kahan_sum_cases():
    assert not np.any(kahan_sum([], shape=(3,)))
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(kahan_sum([x]), x)


def test_accumulate_is_order_independent(rng):
    vecs = [moment_vector(Gaussian1D(rng.uniform(0.1, 2), rng.uniform(1, 8), rng.uniform(0.05, 0.5)), CFG, "power", 4)
            for _ in range(100)]
    ref = accumulate(vecs).values
    for _ in range(3):
        perm = [vecs[i] for i in rng.permutation(100)]
        assert accumulate(perm).values.tobytes() == ref.tobytes()
    assert not np.any(accumulate([], kind="trig", n=5).values)


def test_surface_moments():
    g = Gaussian1D(0.9, 2.0, 0.1)
    mv = mboit_surface_moments(g, CFG, 4)
    z = float(warp(2.0, CFG))
    np.testing.assert_allclose(mv.values[0], zeroth_moment(g, CFG), rtol=1e-15)
    np.testing.assert_allclose(mv.values[2], mv.values[0] * z * z, rtol=1e-14)
    assert not np.any(mboit_surface_moments(Gaussian1D(0.0, 2.0, 0.1), CFG, 4).values)


def test_surface_moment_arithmetic():
    # tau 0.7 at warped depth 0.4, second moment
    assert 0.7 * 0.4**2 == pytest.approx(0.112)


def test_raw_moment_bound(rng):
    assert raw_moment_lower_bound_check(Gaussian1D(0.0, 2.0, 0.5), 3) is True
    assert raw_moment_lower_bound_check(Gaussian1D(1.0, 2.0, 0.5), 2, near=3.0) is None
    for _ in range(20):
        g = Gaussian1D(rng.uniform(0.1, 3), rng.uniform(0.5, 6), rng.uniform(0.05, 2))
        assert all(raw_moment_lower_bound_check(g, k) for k in range(7))


def test_real_view_round_trip(rng):
    vals = rng.normal(size=6) + 1j * rng.normal(size=6)
    vals[0] = vals[0].real
    mv = MomentVector("trig", 5, vals)
    back = MomentVector.from_real_view("trig", 5, mv.real_view())
    np.testing.assert_array_equal(back.values, mv.values)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_reported():
    with pytest.raises(NumericOverflowError):
        power_moments_1d(Gaussian1D(1e308, 5.0, 1e5), CFG, 4)
