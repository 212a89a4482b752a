import math

import numpy as np
import pytest

from momentsplat import adc
from momentsplat.core import Gaussian3D, Scene, quat_to_matrix


def _g(w=1.0, scale=(1.0, 1.0, 1.0), **kw):
    return Gaussian3D.create(w, (0.5, -0.2, 1.0), scale, **kw)


def test_view_independent_opacity():
    assert adc.view_independent_opacity(_g(0.0)) == 0.0
    assert adc.view_independent_opacity(_g(1.0)) == pytest.approx(1 - math.exp(-math.sqrt(2 * math.pi)))


def test_init_density():
    o = 1 - math.exp(-math.sqrt(2 * math.pi))
    assert adc.init_density(o, (1, 1, 1)) == pytest.approx(1.0, rel=1e-12)
    assert adc.init_density(1e-12, (1, 1, 1)) < 1e-11
    assert adc.init_density(0.5, (1, 2, 3)) == pytest.approx(math.log(2) / (math.sqrt(2 * math.pi) * 2), rel=1e-12)
    w, clamped = adc.init_density(1.0, (1, 1, 1), return_flag=True)
    assert clamped and math.isfinite(w)


def test_clone_halves_weight():
    a, b = adc.clone(_g(0.8))
    assert a.weight == b.weight == 0.4
    np.testing.assert_array_equal(a.mean, b.mean)


def test_split_geometry():
    q = np.array([0.8, 0.1, -0.3, 0.5])
    g = _g(2.0, scale=(0.2, 0.9, 0.4), rotation=q)
    p = adc.REFERENCE_SPLIT
    a, b = adc.split(g, p)
    axis = quat_to_matrix(q / np.linalg.norm(q))[:, 1]
    np.testing.assert_allclose(np.abs((a.mean - g.mean) @ axis), p.delta * 0.9, rtol=1e-12)
    np.testing.assert_allclose(a.mean + b.mean, 2 * g.mean, atol=1e-14)
    np.testing.assert_allclose(a.scale, g.scale * p.gamma, rtol=1e-15)
    assert a.weight == g.weight
    assert adc.view_independent_opacity(a) <= adc.view_independent_opacity(g)


def test_split_axis_tie_is_deterministic():
    g = _g(1.0, scale=(0.5, 0.5, 0.2))
    np.testing.assert_array_equal(adc.split_axis(g), adc.split_axis(g.replace()))
    np.testing.assert_allclose(adc.split_axis(g), [0.0, 1.0, 0.0])


def test_objective_properties():
    assert adc.split_objective(1.0, 0.0) > 0
    assert adc.split_objective(0.62, 0.4) == pytest.approx(adc.split_objective(0.62, -0.4), rel=1e-12)
    best = adc.split_optimize()
    assert best.objective < adc.split_objective(5 / 8, 0.0)
    assert best.objective <= adc.split_objective(adc.REFERENCE_SPLIT.gamma, adc.REFERENCE_SPLIT.delta)


def test_prune_mask():
    scene = Scene([_g(0.0), _g(1.0), _g(0.01)])
    assert adc.prune_mask(scene, 0.0) == [False, False, False]
    ops = [adc.view_independent_opacity(g) for g in scene.gaussians]
    assert adc.prune_mask(scene, 0.1) == [o < 0.1 for o in ops] == [True, False, True]
