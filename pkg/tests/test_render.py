import math

import numpy as np
import pytest

from momentsplat.core import Camera, Gaussian3D, Scene
from momentsplat.errors import ConfigError
from momentsplat.io import load_moments, save_moments
from momentsplat.metrics import compare
from momentsplat.oracle import oracle_render
from momentsplat.render import RenderConfig, render
from momentsplat.scenes import load_bundled


def _small(cam, size=32):
    K = cam.K.copy()
    K[:2] *= size / cam.width
    return Camera(K, cam.R, cam.t, size, size)


def test_empty_scene_is_background(small_camera):
    bg = (0.1, 0.2, 0.3)
    res = render(Scene([], bg), small_camera)
    np.testing.assert_allclose(res.image.rgb, np.broadcast_to(bg, res.image.rgb.shape), rtol=1e-7)
    np.testing.assert_array_equal(res.image.alpha, 0.0)


def test_opaque_gaussian_covers_centre(small_camera):
    g = Gaussian3D.create(200.0, (0, 0, 0), (0.5, 0.5, 0.5), color=(1.0, 0.0, 0.0))
    res = render(Scene([g]), small_camera)
    assert res.image.alpha[16, 16] >= 0.99
    np.testing.assert_allclose(res.image.rgb[16, 16], [1.0, 0.0, 0.0], atol=0.02)


@pytest.mark.parametrize("kind", ["power", "trig"])
def test_close_to_oracle(one_gaussian_scene, small_camera, kind):
    res = render(one_gaussian_scene, small_camera, RenderConfig(moments=kind))
    ref = oracle_render(one_gaussian_scene, small_camera)
    assert compare(res.image.data, ref).psnr > 35.0
    # pixels outside the footprint (opacity below c) are skipped
    np.testing.assert_allclose(res.image.alpha, ref[..., 3], atol=RenderConfig().confidence)
    inside = res.image.alpha > 0
    np.testing.assert_allclose(res.image.alpha[inside], ref[..., 3][inside], atol=1e-6)


def test_alpha_matches_moment_dump(one_gaussian_scene, small_camera, tmp_path):
    cfg = RenderConfig()
    res = render(one_gaussian_scene, small_camera, cfg)
    save_moments(tmp_path / "m.bin", res.moments, cfg.moments, cfg.n, cfg.theta)
    _, mv = load_moments(tmp_path / "m.bin")
    np.testing.assert_allclose(res.image.alpha, -np.expm1(-mv.m0), atol=1e-7)


def test_thread_count_independence():
    scene, cam = load_bundled()
    cam = _small(cam, 64)
    cfg = RenderConfig(deterministic=True, block_rows=8)
    one = render(scene, cam, cfg).image.data
    many = render(scene, cam, RenderConfig(deterministic=True, block_rows=8, threads=8)).image.data
    again = render(scene, cam, cfg).image.data
    assert one.tobytes() == many.tobytes() == again.tobytes()


def test_permutation_independence(rng):
    scene, cam = load_bundled()
    cam = _small(cam, 48)
    cfg = RenderConfig(deterministic=True)
    ref = render(scene, cam, cfg).image.data
    img = render(scene.permuted(rng.permutation(len(scene))), cam, cfg).image.data
    assert img.tobytes() == ref.tobytes()


def test_stats_and_penalty(one_gaussian_scene, small_camera):
    res = render(one_gaussian_scene, small_camera)
    assert res.stats.visible == 1 and res.stats.pairs > 0
    assert res.stats.penalty >= 0.0
    assert np.all(res.penalty >= 0)


def test_config_from_dict():
    cfg = RenderConfig.from_dict({"moments": {"kind": "trig", "n": 3}, "quadrature": {"N": 8}, "far": "inf"})
    assert cfg.moments == "trig" and cfg.n == 3 and cfg.N == 8 and math.isinf(cfg.far)
    assert RenderConfig(moments="trig").n == 5
    with pytest.raises(ConfigError):
        RenderConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RenderConfig(beta=2.0)
