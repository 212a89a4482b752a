import sys

import numpy as np
import pytest

from momentsplat.core import Camera, Gaussian3D, Scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_camera():
    return Camera.look_at((0.0, 0.0, -4.0), (0.0, 0.0, 0.0), fov_deg=45.0, width=32, height=32)


@pytest.fixture
def one_gaussian_scene():
    g = Gaussian3D.create(3.0, (0.0, 0.0, 0.0), (0.4, 0.3, 0.5), color=(0.8, 0.3, 0.1))
    return Scene([g], background=(0.0, 0.0, 0.1))


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(f"criterion {number:2d}: {results[number].line()}")
