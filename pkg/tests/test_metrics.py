import math

import numpy as np
import pytest

from momentsplat.errors import UsageError
from momentsplat.metrics import compare, psnr_from_mse


def test_identical_images():
    img = np.random.default_rng(0).uniform(size=(8, 8, 3))
    res = compare(img, img)
    assert math.isinf(res.psnr) and res.mse == 0.0


def test_uniform_offset_on_one_channel():
    a = np.full((4, 5, 3), 0.5)
    b = a.copy()
    b[..., 1] += 0.1
    res = compare(a, b)
    np.testing.assert_allclose(res.mse, 0.01 / 3, rtol=1e-12)
    np.testing.assert_allclose(res.psnr, 10 * math.log10(3 / 0.01), rtol=1e-12)
    assert res.psnr == pytest.approx(24.77, abs=5e-3)
    np.testing.assert_allclose(res.mse_per_channel, [0.0, 0.01, 0.0], atol=1e-15)


def test_alpha_ignored():
    a = np.zeros((2, 2, 4))
    b = a.copy()
    b[..., 3] = 1.0
    assert math.isinf(compare(a, b).psnr)


def test_size_mismatch():
    with pytest.raises(UsageError):
        compare(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))


def test_psnr_sentinel():
    assert psnr_from_mse(0.0) == math.inf
