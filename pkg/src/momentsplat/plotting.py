"""Report figures written next to the delimited CLI output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import srgb_encode  # noqa: E402


def bounds_sweep_figure(eta, lower, upper, tau_true, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(eta, lower, upper, color="tab:blue", alpha=0.25, label="[L, U]")
    ax.plot(eta, lower, color="tab:blue", lw=1)
    ax.plot(eta, upper, color="tab:blue", lw=1, ls="--")
    if tau_true is not None:
        ax.plot(eta, tau_true, color="k", lw=1.5, label="exact")
    ax.set_xlabel("warped depth")
    ax.set_ylabel("optical depth")
    ax.legend(loc="upper left")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def proxy_debug_figure(opacity, conf, ewa, c, path, title=None):
    """Isolated opacity with the ``c`` level set and both proxy outlines."""
    h, w = opacity.shape
    fig, ax = plt.subplots(figsize=(6, 6 * h / w))
    ax.imshow(opacity, cmap="gray", origin="upper", extent=(0, w, h, 0), vmin=0.0, vmax=max(float(opacity.max()), c))
    if float(opacity.max()) > c:
        ax.contour(np.arange(w) + 0.5, np.arange(h) + 0.5, opacity, levels=[c], colors="yellow", linewidths=1)
    for prox, color, label in ((conf, "tab:red", "confidence"), (ewa, "tab:cyan", "EWA")):
        if prox is None:
            continue
        if prox.fallback:
            ax.plot([], [], color=color, label=f"{label} (full screen)")
            continue
        pts = prox.boundary(200)
        ax.plot(pts[:, 0], pts[:, 1], color=color, lw=1.2, label=label)
        x0, x1, y0, y1 = prox.rect
        ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, ec=color, ls=":", lw=0.8))
    ax.plot([], [], color="yellow", label=f"opacity = {c:g}")
    ax.set_xlim(0, w)
    ax.set_ylim(h, 0)
    ax.legend(loc="lower right", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def compare_figure(img_a, img_b, path, labels=("A", "B"), psnr=None):
    a = np.asarray(img_a, dtype=float)[..., :3]
    b = np.asarray(img_b, dtype=float)[..., :3]
    diff = np.max(np.abs(a - b), axis=-1)
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    axes[0].imshow(srgb_encode(a))
    axes[0].set_title(labels[0])
    axes[1].imshow(srgb_encode(b))
    axes[1].set_title(labels[1])
    im = axes[2].imshow(diff, cmap="magma")
    axes[2].set_title("max abs diff" + (f" (PSNR {psnr:.2f} dB)" if psnr is not None and np.isfinite(psnr) else ""))
    fig.colorbar(im, ax=axes[2], fraction=0.046)
    for ax in axes:
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
