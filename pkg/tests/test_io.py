import copy
import json

import numpy as np
import pytest

from momentsplat.errors import SchemaError
from momentsplat.io import (load_image, load_moments, load_scene, parse_scene, read_pfm, save_image, save_moments,
                            save_scene, write_pfm)
from momentsplat.scenes import load_bundled

MINIMAL = {
    "gaussians": [{"weight": 1.5, "mean": [0, 0, 3], "scale": [0.2, 0.3, 0.4], "rotation": [1, 0, 0, 0],
                   "sh": {"degree": 0, "coeffs": [[0.1, 0.2, 0.3]]}}],
}


def test_minimal_scene():
    scene, cams = parse_scene(MINIMAL)
    assert len(scene) == 1 and cams == []
    assert scene.gaussians[0].weight == 1.5
    np.testing.assert_array_equal(scene.background, 0.0)


def test_missing_weight_names_field():
    data = copy.deepcopy(MINIMAL)
    del data["gaussians"][0]["weight"]
    with pytest.raises(SchemaError, match="weight") as info:
        parse_scene(data)
    assert info.value.field == "gaussians[0].weight"


@pytest.mark.parametrize("patch, field", [
    ({"scale": [1, 2]}, "gaussians[0].scale"),
    ({"sh": {"degree": 1, "coeffs": [[0, 0, 0]]}}, "gaussians[0].sh.coeffs"),
    ({"sh": {"degree": 4, "coeffs": []}}, "gaussians[0].sh.degree"),
    ({"weight": "heavy"}, "gaussians[0].weight"),
])
def test_bad_fields(patch, field):
    data = copy.deepcopy(MINIMAL)
    data["gaussians"][0].update(patch)
    with pytest.raises(SchemaError) as info:
        parse_scene(data)
    assert info.value.field == field


def test_syntax_error_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"gaussians": [\n  {"weight": 1,,}\n]}')
    with pytest.raises(SchemaError, match="line 2"):
        load_scene(p)


def test_scene_round_trip(tmp_path):
    scene, cam = load_bundled()
    save_scene(scene, tmp_path / "s.json", [cam])
    back, cams = load_scene(tmp_path / "s.json")
    assert len(back) == len(scene)
    for a, b in zip(scene.gaussians, back.gaussians):
        assert a.key() == b.key()
    np.testing.assert_array_equal(cams[0].K, cam.K)


def test_pfm_round_trip_is_bitwise(tmp_path, rng):
    rgb = rng.normal(size=(7, 5, 3)).astype(np.float32)
    gray = rng.normal(size=(7, 5)).astype(np.float32)
    write_pfm(tmp_path / "a.pfm", rgb)
    write_pfm(tmp_path / "b.pfm", gray)
    assert read_pfm(tmp_path / "a.pfm").tobytes() == rgb.tobytes()
    assert read_pfm(tmp_path / "b.pfm").tobytes() == gray.tobytes()


def test_save_image_writes_all_files(tmp_path, rng):
    data = rng.uniform(size=(6, 4, 4)).astype(np.float32)
    paths = save_image(data, tmp_path / "out")
    assert sorted(p.name for p in paths) == ["out.alpha.pfm", "out.pfm", "out.png"]
    assert load_image(tmp_path / "out.pfm").tobytes() == data.tobytes()
    png = load_image(tmp_path / "out.png")
    np.testing.assert_allclose(png[..., :3], data[..., :3], atol=0.01)


def test_save_image_rejects_nan(tmp_path):
    data = np.zeros((3, 3, 4), dtype=np.float32)
    data[1, 2, 0] = np.nan
    with pytest.raises(Exception, match=r"\(1, 2\)"):
        save_image(data, tmp_path / "x")


@pytest.mark.parametrize("kind, n", [("power", 4), ("trig", 5)])
def test_moment_dump_round_trip(tmp_path, rng, kind, n):
    size = 2 * n + 1 if kind == "power" else n + 1
    vals = rng.normal(size=(3, 4, size)).astype(np.float32).astype(float)
    if kind == "trig":
        vals = vals + 1j * rng.normal(size=vals.shape).astype(np.float32)
        vals[..., 0] = vals[..., 0].real
    save_moments(tmp_path / "m.bin", vals, kind, n, 0.6, {"note": "x"})
    header, mv = load_moments(tmp_path / "m.bin")
    assert header["kind"] == kind and header["note"] == "x"
    np.testing.assert_array_equal(mv.values, vals)
    first = (tmp_path / "m.bin").read_bytes().split(b"\n", 1)[0]
    assert json.loads(first)["height"] == 3
