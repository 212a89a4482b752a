"""Three-pass CPU renderer: cull, moment pass, quadrature pass, rescale.

Pixel rows are split into blocks that workers process independently. Inside
a block every Gaussian is visited in a fixed order, so in deterministic mode
(canonical Gaussian order plus compensated sums) the image does not depend
on the input order or on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .bounds import DEFAULT_BETA, MomentSolver
from .core import Camera, Scene, bounding_sphere_cull, evaluate_sh, project_to_rays
from .errors import ConfigError, MomentSplatError, NumericOverflowError, ProxyDegenerateError
from .moments import DEFAULT_THETA, POWER, TRIG, MomentVector, particle_moments
from .proxy import DEFAULT_CONFIDENCE, compute_proxy
from .quadrature import QuadratureConfig, interval_terms, rescale_radiance, sample_intervals
from .warp import DEFAULT_LAMBDA, DEFAULT_NEAR, WarpConfig, warp

DEFAULT_N = {POWER: 4, TRIG: 5}


@dataclass(frozen=True)
class RenderConfig:
    moments: str = POWER
    n: int | None = None
    theta: float = DEFAULT_THETA
    lam: float = DEFAULT_LAMBDA
    near: float = DEFAULT_NEAR
    far: float = math.inf
    N: int = 5
    kappa: float = 3.0
    epsilon: float = 1e-4
    beta: float = DEFAULT_BETA
    confidence: float = DEFAULT_CONFIDENCE
    proxy: str = "confidence"
    deterministic: bool = False
    threads: int = 1
    k_cull: float = 3.0
    block_rows: int = 32
    seed: int = 0  # recorded only; rendering draws no random numbers

    def __post_init__(self):
        if self.moments not in (POWER, TRIG):
            raise ConfigError(f"moments must be 'power' or 'trig', got {self.moments!r}")
        if self.n is None:
            object.__setattr__(self, "n", DEFAULT_N[self.moments])
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.proxy not in ("confidence", "ewa"):
            raise ConfigError(f"proxy must be 'confidence' or 'ewa', got {self.proxy!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.warp  # validates lam/near/far
        self.quadrature

    @property
    def warp(self) -> WarpConfig:
        return WarpConfig(self.lam, self.near, self.far)

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(self.N, self.kappa, self.epsilon)

    @property
    def moment_size(self) -> int:
        return MomentVector.size(self.moments, self.n)

    @classmethod
    def from_dict(cls, data: dict) -> "RenderConfig":
        """Build from a flat or sectioned dict (``quadrature.N`` style keys allowed)."""
        flat = {}
        aliases = {"lambda": "lam", "kind": "moments", "t_n": "near", "t_f": "far", "c": "confidence"}
        for key, val in data.items():
            if isinstance(val, dict):
                for sub, v in val.items():
                    flat[aliases.get(sub, sub)] = v
            else:
                flat[aliases.get(key, key)] = val
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if isinstance(flat.get("far"), str):
            flat["far"] = float(flat["far"])
        return cls(**flat)

    def metadata(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["far"] = "inf" if math.isinf(self.far) else self.far
        return out


@dataclass
class ImageBuffer:
    """RGBA float32 image; alpha is ``1 - exp(-m0)``."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[-1] != 4:
            raise ValueError("image buffer must have shape (height, width, 4)")

    @classmethod
    def blank(cls, width: int, height: int, background=(0.0, 0.0, 0.0)) -> "ImageBuffer":
        d = np.zeros((height, width, 4), dtype=np.float32)
        d[..., :3] = background
        return cls(d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.data[..., :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.data[..., 3]

    def nan_pixels(self) -> list:
        bad = ~np.all(np.isfinite(self.data), axis=-1)
        return [(int(y), int(x)) for y, x in zip(*np.nonzero(bad))]


@dataclass
class RenderStats:
    visible: int = 0
    culled: int = 0
    proxy_fallbacks: int = 0
    proxy_skipped: int = 0
    near_flags: int = 0
    degenerate_pixels: int = 0
    pairs: int = 0
    penalty: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RenderResult:
    image: ImageBuffer
    moments: np.ndarray
    penalty: np.ndarray
    opacity: np.ndarray
    stats: RenderStats = field(default_factory=RenderStats)


@dataclass
class _Visible:
    index: int
    g: object
    rect: tuple


def _kahan_add(total, comp, idx, value):
    """``total[idx] += value`` with a compensation buffer (indices unique)."""
    y = value - comp[idx]
    t = total[idx] + y
    comp[idx] = (t - total[idx]) - y
    total[idx] = t


def _visible_set(scene: Scene, cam: Camera, cfg: RenderConfig, stats: RenderStats):
    order = range(len(scene.gaussians))
    if cfg.deterministic:
        order = sorted(order, key=lambda i: scene.gaussians[i].key())
    out = []
    for i in order:
        g = scene.gaussians[i]
        if g.weight == 0.0 or not bounding_sphere_cull(g, cam, cfg.k_cull, 0.0):
            stats.culled += 1
            continue
        try:
            prox = compute_proxy(g, cam, cfg.proxy, cfg.confidence, cfg.near)
        except ProxyDegenerateError:
            stats.proxy_skipped += 1
            continue
        stats.proxy_fallbacks += int(prox.fallback)
        stats.near_flags += int(prox.near_flag)
        if prox.empty:
            stats.culled += 1
            continue
        out.append(_Visible(i, g, prox.rect))
    stats.visible = len(out)
    return out


def _block_pairs(vis, r0, r1):
    """Per visible Gaussian: local row/col index arrays of its rect inside rows ``[r0, r1)``."""
    for v in vis:
        x0, x1, y0, y1 = v.rect
        a, b = max(y0, r0), min(y1, r1)
        if a >= b:
            continue
        yy, xx = np.meshgrid(np.arange(a, b), np.arange(x0, x1), indexing="ij")
        yield v, yy.ravel(), xx.ravel()


def _render_block(scene, cam, cfg: RenderConfig, vis, r0, r1, dirs):
    W = cam.width
    rows = r1 - r0
    wcfg = cfg.warp
    qcfg = cfg.quadrature
    size = cfg.moment_size
    dtype = float if cfg.moments == POWER else complex
    mom = np.zeros((rows * W, size), dtype=dtype)
    mom_c = np.zeros_like(mom)
    origin = cam.center
    pairs = list(_block_pairs(vis, r0, r1))
    cache = []
    for v, yy, xx in pairs:
        pix = (yy - r0) * W + xx
        d = dirs[yy, xx]
        a, m, s = project_to_rays(v.g, origin, d)
        try:
            mk = particle_moments((a, m, s), wcfg, cfg.moments, cfg.n, cfg.theta)
        except NumericOverflowError as exc:
            raise NumericOverflowError(f"Gaussian {v.index}: {exc}", k=exc.k) from exc
        if cfg.deterministic:
            _kahan_add(mom, mom_c, pix, mk)
        else:
            mom[pix] += mk
        cache.append((v, pix, d, a, m, s))

    solver = MomentSolver(cfg.moments, cfg.n, mom, cfg.theta)
    rgb = np.zeros((rows * W, 3))
    opa = np.zeros(rows * W)
    pen = np.zeros(rows * W)
    rgb_c, opa_c, pen_c = np.zeros_like(rgb), np.zeros_like(opa), np.zeros_like(pen)

    if cache:
        # all bound queries of the block in one call
        edges = [sample_intervals((a, m, s), cfg.near, cfg.far, qcfg) for (_, _, _, a, m, s) in cache]
        q_rows = np.concatenate([np.repeat(pix, qcfg.N + 1) for (_, pix, *_rest) in cache])
        q_eta = np.clip(warp(np.concatenate([e.ravel() for e in edges]), wcfg), 0.0, 1.0)
        lo, up = solver.bounds(q_rows, q_eta)
        tau_all = (1.0 - cfg.beta) * lo + cfg.beta * up
        start = 0
        for (v, pix, d, a, m, s), e in zip(cache, edges):
            count = e.size
            tau = tau_all[start : start + count].reshape(e.shape)
            start += count
            share, penalty = interval_terms((a, m, s), e, tau, qcfg)
            color = evaluate_sh(v.g.sh, d)
            contrib = share[:, None] * color
            if cfg.deterministic:
                _kahan_add(rgb, rgb_c, pix, contrib)
                _kahan_add(opa, opa_c, pix, share)
                _kahan_add(pen, pen_c, pix, penalty)
            else:
                rgb[pix] += contrib
                opa[pix] += share
                pen[pix] += penalty

    m0 = np.real(mom[:, 0])
    out = rescale_radiance(rgb, opa, m0, scene.background, cfg.epsilon)
    alpha = -np.expm1(-m0)
    return out, alpha, mom, pen, opa, solver.degenerate_count, len(cache)


def render(scene: Scene, cam: Camera, cfg: RenderConfig = RenderConfig()) -> RenderResult:
    """Render ``scene`` from ``cam``; returns the image plus per-pixel moments and diagnostics."""
    stats = RenderStats()
    H, W = cam.height, cam.width
    vis = _visible_set(scene, cam, cfg, stats)
    dirs = cam.pixel_grid_directions()
    size = cfg.moment_size
    dtype = float if cfg.moments == POWER else complex
    image = np.zeros((H, W, 4))
    moments = np.zeros((H, W, size), dtype=dtype)
    penalty = np.zeros((H, W))
    opacity = np.zeros((H, W))
    blocks = [(r, min(H, r + cfg.block_rows)) for r in range(0, H, cfg.block_rows)]

    def run(block):
        r0, r1 = block
        return block, _render_block(scene, cam, cfg, vis, r0, r1, dirs)

    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    for (r0, r1), (rgb, alpha, mom, pen, opa, degenerate, pairs) in results:
        n = r1 - r0
        image[r0:r1, :, :3] = rgb.reshape(n, W, 3)
        image[r0:r1, :, 3] = alpha.reshape(n, W)
        moments[r0:r1] = mom.reshape(n, W, size)
        penalty[r0:r1] = pen.reshape(n, W)
        opacity[r0:r1] = opa.reshape(n, W)
        stats.degenerate_pixels += degenerate
        stats.pairs += pairs
    stats.penalty = float(np.sum(penalty))
    buf = ImageBuffer(image)
    bad = buf.nan_pixels()
    if bad:
        raise MomentSplatError(f"non-finite output at pixels (row, col): {bad[:10]}")
    return RenderResult(buf, moments, penalty, opacity, stats)


def with_overrides(cfg: RenderConfig, **changes) -> RenderConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(cfg, **changes)
