"""Scene files, image files and moment dumps.

Scene JSON layout::

    {"gaussians": [{"weight": w, "mean": [3], "scale": [3], "rotation": [4],
                    "sh": {"degree": d, "coeffs": [[r, g, b], ...]}}],
     "background": [3],
     "cameras": [{"K": [9], "world_to_cam": [12], "width": W, "height": H}]}

``rotation`` is (w, x, y, z); ``K`` and ``world_to_cam`` (3x4) are row-major.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .core import Camera, Gaussian3D, Scene
from .errors import InvalidPrimitiveError, MomentSplatError, SchemaError
from .moments import MomentVector


def _field(obj, key, path, kind=None, length=None):
    where = f"{path}.{key}" if path else key
    if not isinstance(obj, dict):
        raise SchemaError(f"{path or 'top level'}: expected an object", path)
    if key not in obj:
        raise SchemaError(f"missing required field {where!r}", where)
    val = obj[key]
    if kind == "vector":
        if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
            raise SchemaError(f"{where}: expected a list of numbers", where)
        if length is not None and len(val) != length:
            raise SchemaError(f"{where}: expected {length} numbers, got {len(val)}", where)
        return np.asarray(val, dtype=float)
    if kind == "number":
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"{where}: expected a number", where)
        return float(val)
    if kind == "int":
        if not isinstance(val, int) or isinstance(val, bool) or val <= 0:
            raise SchemaError(f"{where}: expected a positive integer", where)
        return val
    return val


def _parse_sh(obj, path):
    sh = _field(obj, "sh", path)
    where = f"{path}.sh"
    degree = _field(sh, "degree", where)
    if not isinstance(degree, int) or isinstance(degree, bool) or not 0 <= degree <= 3:
        raise SchemaError(f"{where}.degree: expected 0..3", f"{where}.degree")
    coeffs = _field(sh, "coeffs", where)
    try:
        arr = np.asarray(coeffs, dtype=float).reshape(-1, 3)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}.coeffs: expected numbers in groups of 3", f"{where}.coeffs") from None
    if arr.shape[0] != (degree + 1) ** 2:
        raise SchemaError(f"{where}.coeffs: degree {degree} needs {(degree + 1) ** 2} RGB triples, "
                          f"got {arr.shape[0]}", f"{where}.coeffs")
    return arr


def parse_gaussian(obj, path="gaussians[0]") -> Gaussian3D:
    weight = _field(obj, "weight", path, "number")
    mean = _field(obj, "mean", path, "vector", 3)
    scale = _field(obj, "scale", path, "vector", 3)
    rot = _field(obj, "rotation", path, "vector", 4)
    sh = _parse_sh(obj, path)
    try:
        return Gaussian3D.create(weight, mean, scale, rot, sh=sh)
    except InvalidPrimitiveError as exc:
        raise SchemaError(f"{path}: {exc}", path) from exc


def parse_camera(obj, path="cameras[0]") -> Camera:
    K = _field(obj, "K", path, "vector", 9).reshape(3, 3)
    Rt = _field(obj, "world_to_cam", path, "vector", 12).reshape(3, 4)
    width = _field(obj, "width", path, "int")
    height = _field(obj, "height", path, "int")
    try:
        return Camera(K, Rt[:, :3], Rt[:, 3], width, height)
    except InvalidPrimitiveError as exc:
        raise SchemaError(f"{path}: {exc}", path) from exc


def parse_scene(data: dict):
    """``(Scene, [Camera, ...])`` from decoded JSON."""
    if not isinstance(data, dict):
        raise SchemaError("top level: expected an object", "")
    items = _field(data, "gaussians", "")
    if not isinstance(items, list):
        raise SchemaError("gaussians: expected a list", "gaussians")
    gaussians = [parse_gaussian(g, f"gaussians[{i}]") for i, g in enumerate(items)]
    background = _field(data, "background", "", "vector", 3) if "background" in data else np.zeros(3)
    cams = data.get("cameras", [])
    if not isinstance(cams, list):
        raise SchemaError("cameras: expected a list", "cameras")
    cameras = [parse_camera(c, f"cameras[{i}]") for i, c in enumerate(cams)]
    try:
        scene = Scene(gaussians, background)
    except InvalidPrimitiveError as exc:
        raise SchemaError(f"background: {exc}", "background") from exc
    return scene, cameras


def load_scene(path):
    """Read a scene file; JSON syntax errors report line and column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}", None) from exc
    return parse_scene(data)


def gaussian_to_dict(g: Gaussian3D) -> dict:
    return {
        "weight": float(g.weight),
        "mean": g.mean.tolist(),
        "scale": g.scale.tolist(),
        "rotation": g.rotation.tolist(),
        "sh": {"degree": g.sh_degree, "coeffs": g.sh.tolist()},
    }


def camera_to_dict(cam: Camera) -> dict:
    Rt = np.concatenate([cam.R, cam.t[:, None]], axis=1)
    return {"K": cam.K.ravel().tolist(), "world_to_cam": Rt.ravel().tolist(),
            "width": cam.width, "height": cam.height}


def scene_to_dict(scene: Scene, cameras=()) -> dict:
    return {
        "gaussians": [gaussian_to_dict(g) for g in scene.gaussians],
        "background": scene.background.tolist(),
        "cameras": [camera_to_dict(c) for c in cameras],
    }


def save_scene(scene: Scene, path, cameras=()):
    Path(path).write_text(json.dumps(scene_to_dict(scene, cameras), indent=1))


# images


def check_finite(data: np.ndarray):
    bad = ~np.isfinite(data)
    if data.ndim == 3:
        bad = np.any(bad, axis=-1)
    if np.any(bad):
        coords = [(int(y), int(x)) for y, x in zip(*np.nonzero(bad))]
        more = f" (and {len(coords) - 20} more)" if len(coords) > 20 else ""
        raise MomentSplatError(f"non-finite values at pixels (row, col): {coords[:20]}{more}")


def srgb_encode(linear) -> np.ndarray:
    x = np.clip(np.asarray(linear, dtype=float), 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)


def save_png(data, path):
    """8-bit PNG; RGB(A) channels are sRGB encoded, alpha stays linear."""
    data = np.asarray(data, dtype=float)
    check_finite(data)
    out = np.empty_like(data)
    out[..., :3] = srgb_encode(data[..., :3])
    if data.shape[-1] == 4:
        out[..., 3] = np.clip(data[..., 3], 0.0, 1.0)
    Image.fromarray(np.round(out * 255.0).astype(np.uint8)).save(path)


def write_pfm(path, data):
    """Little-endian PFM (``PF`` for 3 channels, ``Pf`` for 1), rows stored bottom-up."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[-1] == 3:
        header = "PF"
    elif arr.ndim == 2:
        header = "Pf"
    else:
        raise ValueError("PFM holds 1 or 3 channels")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"PF", b"Pf"):
            raise SchemaError(f"{path}: not a PFM file", "header")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        arr = np.frombuffer(fh.read(), dtype=dtype)
    shape = (h, w, 3) if kind == b"PF" else (h, w)
    return arr.reshape(shape)[::-1].astype(np.float32)


def alpha_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".alpha.pfm")


def save_image(data, path):
    """Write ``<stem>.png`` (sRGB) and ``<stem>.pfm`` plus ``<stem>.alpha.pfm`` (linear).

    ``path`` may carry any of these suffixes or none; returns the written paths.
    """
    data = np.asarray(data, dtype=np.float32)
    check_finite(data)
    p = Path(path)
    stem = p.with_suffix("") if p.suffix.lower() in (".png", ".pfm") else p
    png, pfm = stem.with_suffix(".png"), stem.with_suffix(".pfm")
    save_png(data, png)
    write_pfm(pfm, data[..., :3])
    written = [png, pfm]
    if data.shape[-1] == 4:
        write_pfm(alpha_path(pfm), data[..., 3])
        written.append(alpha_path(pfm))
    return written


def load_image(path) -> np.ndarray:
    """Linear image from a PFM (alpha attached when its sidecar exists) or an sRGB PNG."""
    p = Path(path)
    if p.suffix.lower() == ".png":
        raw = np.asarray(Image.open(p), dtype=float) / 255.0
        rgb = raw[..., :3]
        lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
        return np.concatenate([lin, raw[..., 3:]], axis=-1).astype(np.float32)
    rgb = read_pfm(p)
    a = alpha_path(p)
    if a.exists():
        return np.concatenate([rgb, read_pfm(a)[..., None]], axis=-1)
    return rgb


# moment dumps


def save_moments(path, moments: np.ndarray, kind: str, n: int, theta: float, extra=None):
    """One JSON header line, then ``(height, width, channels)`` little-endian float32 values.

    Trigonometric moments are stored as ``[m0, re1, im1, ...]``.
    """
    mv = MomentVector(kind, n, moments, theta)
    data = np.asarray(mv.real_view(), dtype="<f4")
    header = {"kind": kind, "n": n, "theta": theta, "height": data.shape[0], "width": data.shape[1],
              "channels": data.shape[2], "dtype": "<f4", "order": "row-major"}
    header.update(extra or {})
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def load_moments(path):
    """``(header, MomentVector)`` from a moment dump."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f4")
    data = data.reshape(header["height"], header["width"], header["channels"]).astype(float)
    return header, MomentVector.from_real_view(header["kind"], header["n"], data, header["theta"])


def dumps_json(obj) -> str:
    """JSON with infinities written as strings."""

    def fix(v):
        if isinstance(v, float) and not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [fix(x) for x in v]
        if isinstance(v, np.generic):
            return fix(v.item())
        return v

    return json.dumps(fix(obj), indent=1)


def warn(msg: str):
    print(f"momentsplat: {msg}", file=sys.stderr)
