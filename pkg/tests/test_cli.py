import json

import numpy as np
import pytest

from momentsplat.cli import main
from momentsplat.io import read_pfm
from momentsplat.scenes import bundled_path


@pytest.fixture
def scene_file():
    return str(bundled_path())


def test_render_and_compare(tmp_path, scene_file, capsys):
    out = tmp_path / "img"
    assert main(["render", scene_file, "--size", "24", "24", "-o", str(out), "--deterministic",
                 "--moments-out", str(tmp_path / "m.bin")]) == 0
    for suffix in (".png", ".pfm", ".alpha.pfm", ".json"):
        assert (tmp_path / f"img{suffix}").exists()
    meta = json.loads((tmp_path / "img.json").read_text())
    assert meta["config"]["deterministic"] is True
    assert read_pfm(tmp_path / "img.pfm").shape == (24, 24, 3)
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "img.pfm"), str(tmp_path / "img.pfm"), "--json", str(tmp_path / "c.json")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("psnr_db") and lines[1].startswith("inf")
    assert json.loads((tmp_path / "c.json").read_text())["psnr"] == "inf"


def test_bounds_sweep_csv_and_figure(tmp_path, scene_file, capsys):
    fig = tmp_path / "sweep.png"
    assert main(["bounds-sweep", scene_file, "--size", "32", "32", "--pixel", "16", "16", "--samples", "9",
                 "--figure", str(fig)]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "eta,lower,upper,tau_true" and len(rows) == 10
    vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.all(vals[:, 1] <= vals[:, 2])
    assert fig.stat().st_size > 0


def test_proxy_debug(tmp_path, scene_file, capsys):
    assert main(["proxy-debug", scene_file, "--size", "32", "32", "--gaussian", "1", "-o", str(tmp_path / "p.png")]) == 0
    assert capsys.readouterr().out.startswith("proxy,x0")
    assert (tmp_path / "p.png").exists()


def test_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"gaussians": [{"mean": [0, 0, 0]}]}))
    assert main(["render", str(bad), "-o", str(tmp_path / "x")]) == 2
    assert "weight" in capsys.readouterr().err


def test_usage_error_exit_code(tmp_path, scene_file):
    assert main(["render", scene_file, "--camera", "5", "-o", str(tmp_path / "x")]) == 2
    assert main(["render", scene_file, "--beta", "3", "-o", str(tmp_path / "x")]) == 2


def test_selftest_subset(capsys):
    assert main(["selftest", "--quick", "--only", "2,12"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "check,result,name,summary,seconds"
    assert [line.split(",")[1] for line in out[1:]] == ["PASS", "PASS"]


def test_selftest_failure_exit_code(capsys):
    assert main(["selftest", "--only", "6"]) == 1
    assert ",FAIL," in capsys.readouterr().out
