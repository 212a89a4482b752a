import math

import numpy as np
import pytest
from scipy import integrate, special

from momentsplat.core import Gaussian1D, Gaussian3D, Ray, Scene
from momentsplat.errors import UsageError
from momentsplat.moments import zeroth_moment
from momentsplat.oracle import (complex_erf_reference, exact_optical_depth, oracle_moments, oracle_radiance,
                                oracle_radiance_batch)
from momentsplat.warp import WarpConfig

CFG = WarpConfig()


def test_empty_mixture():
    assert exact_optical_depth([], math.inf, 0.01) == 0.0


def test_single_particle_matches_moment_module():
    g = Gaussian1D(1.0, 5.0, 0.5)
    bn = (0.01 - 5.0) / (math.sqrt(2) * 0.5)
    closed = 0.5 * math.sqrt(2 * math.pi) * 0.5 * special.erfc(bn)
    np.testing.assert_allclose(exact_optical_depth([g], math.inf, 0.01), closed, rtol=1e-13)
    np.testing.assert_allclose(exact_optical_depth([g], math.inf, 0.01), zeroth_moment(g, CFG), rtol=1e-12)


def test_linearity():
    g1, g2 = Gaussian1D(1.0, 5.0, 0.5), Gaussian1D(0.3, 2.0, 1.2)
    t = np.linspace(0.0, 9.0, 19)
    both = exact_optical_depth([g1, g2], t, 0.01)
    np.testing.assert_allclose(both, exact_optical_depth([g1], t, 0.01) + exact_optical_depth([g2], t, 0.01),
                               rtol=1e-14, atol=1e-300)


def test_empty_scene_radiance_is_background():
    bg = np.array([0.2, 0.1, 0.05])
    rgb = oracle_radiance(Scene([], bg), Ray.towards(np.zeros(3), np.array([0.0, 0.0, 1.0])))
    np.testing.assert_array_equal(rgb, bg)


def test_single_particle_radiance_closed_form():
    g = Gaussian3D.create(2.0, (0, 0, 4), (0.5, 0.5, 0.5), color=(1.0, 0.5, 0.25))
    bg = np.array([0.1, 0.1, 0.1])
    d = np.array([[0.0, 0.0, 1.0]])
    rgb, alpha = oracle_radiance_batch(Scene([g], bg), np.zeros((1, 3)), d)
    tau = float(exact_optical_depth([Gaussian1D(2.0, 4.0, 0.5)], math.inf, 0.01))
    a = -math.expm1(-tau)
    np.testing.assert_allclose(alpha[0], a, rtol=1e-10)
    np.testing.assert_allclose(rgb[0], a * np.array([1.0, 0.5, 0.25]) + (1 - a) * bg, rtol=1e-8)


def test_moment_zero_is_mass():
    g1s = [Gaussian1D(1.0, 5.0, 0.5), Gaussian1D(0.4, 1.0, 0.3)]
    m = oracle_moments(g1s, CFG, 4)
    np.testing.assert_allclose(m[0], exact_optical_depth(g1s, math.inf, CFG.near), rtol=1e-10)
    assert not np.any(oracle_moments([Gaussian1D(0.0, 1.0, 1.0)], CFG, 4))


def test_moments_against_direct_quadrature():
    g = Gaussian1D(0.6, 3.0, 0.4)
    from momentsplat.warp import warp

    f = lambda t: float(warp(t, CFG)) ** 3 * 0.6 * math.exp(-0.5 * ((t - 3.0) / 0.4) ** 2)
    ref, _ = integrate.quad(f, CFG.near, 20.0, points=[3.0], epsabs=1e-13)
    np.testing.assert_allclose(oracle_moments([g], CFG, 4)[3], ref, rtol=1e-9)


def test_complex_erf_reference():
    x = np.linspace(-3, 3, 7)
    for v in x:
        assert complex_erf_reference(v).real == pytest.approx(float(special.erf(v)), abs=1e-14)
    assert complex_erf_reference(0) == 0
    with pytest.raises(UsageError):
        complex_erf_reference(1 + 20j)
