"""Image comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import UsageError


@dataclass
class CompareResult:
    psnr: float
    mse: float
    mse_per_channel: list
    max_abs_diff: float

    def as_dict(self) -> dict:
        return asdict(self)


def psnr_from_mse(mse: float, peak: float = 1.0) -> float:
    """PSNR in dB; ``inf`` for identical images."""
    return math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)


def compare(img_a, img_b, peak: float = 1.0) -> CompareResult:
    """PSNR, per-channel MSE and max abs diff over the linear RGB channels."""
    a = np.asarray(img_a, dtype=float)
    b = np.asarray(img_b, dtype=float)
    if a.shape[:2] != b.shape[:2]:
        raise UsageError(f"image sizes differ: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    ch = min(3, a.shape[-1], b.shape[-1])
    d = a[..., :ch] - b[..., :ch]
    per = np.mean(d * d, axis=(0, 1))
    mse = float(np.mean(per))
    return CompareResult(psnr_from_mse(mse, peak), mse, per.tolist(), float(np.max(np.abs(d))))
