import math

import numpy as np
import pytest
from scipy import integrate

from momentsplat.errors import ConfigError
from momentsplat.warp import (WarpConfig, power_transform, power_transform_deriv, power_transform_inverse,
                              power_transform_limit, unwarp, warp, warp_deriv)


@pytest.mark.parametrize("lam", [-1.5, -0.5, 0.0, 0.5, 1.0, 2.0])
def test_anchored_at_origin(lam):
    assert power_transform(0.0, lam) == 0.0


def test_identity_member():
    x = np.linspace(0, 10, 11)
    np.testing.assert_array_equal(power_transform(x, 1.0), x)


def test_value_at_two_matches_integrated_derivative():
    ref, _ = integrate.quad(lambda x: float(power_transform_deriv(x, -1.5)), 0.0, 2.0, epsabs=1e-14)
    np.testing.assert_allclose(float(power_transform(2.0, -1.5)), ref, rtol=1e-12)


def test_limit_for_negative_lambda():
    assert power_transform_limit(-1.5) == pytest.approx(2.5 / 1.5)
    assert math.isinf(power_transform_limit(0.5))
    np.testing.assert_allclose(power_transform(1e12, -1.5), power_transform_limit(-1.5), rtol=1e-8)


def test_inverse_round_trip():
    x = np.geomspace(1e-4, 1e4, 50)
    np.testing.assert_allclose(power_transform_inverse(power_transform(x, -1.5), -1.5), x, rtol=1e-10)


def test_endpoints():
    cfg = WarpConfig(near=0.1, far=20.0)
    assert warp(0.1, cfg) == pytest.approx(0.0, abs=1e-15)
    assert warp(20.0, cfg) == pytest.approx(1.0, abs=1e-15)
    assert warp(math.inf, WarpConfig()) == pytest.approx(1.0, abs=1e-15)


def test_derivative_finite_difference(rng):
    cfg = WarpConfig()
    t = rng.uniform(0.05, 50.0, 1000)
    h = 1e-5 * t
    fd = (warp(t + h, cfg) - warp(t - h, cfg)) / (2 * h)
    np.testing.assert_allclose(warp_deriv(t, cfg), fd, rtol=1e-6)


def test_unwarp_inverts_warp():
    cfg = WarpConfig()
    eta = np.linspace(0.0, 0.999, 40)
    np.testing.assert_allclose(warp(unwarp(eta, cfg), cfg), eta, atol=1e-12)


def test_bad_config():
    with pytest.raises(ConfigError):
        WarpConfig(near=5.0, far=1.0)
