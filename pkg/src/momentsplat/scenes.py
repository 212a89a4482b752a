"""Bundled scene and random scene generators used by tests and the self-test."""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .core import Camera, Gaussian3D, Scene
from .io import load_scene

BUNDLED = "six_gaussians.json"


def bundled_path():
    return resources.files("momentsplat") / "data" / BUNDLED


def load_bundled():
    """The six intersecting Gaussians and their 256x256 camera."""
    with resources.as_file(bundled_path()) as p:
        scene, cams = load_scene(p)
    return scene, cams[0]


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def random_gaussian(rng: np.random.Generator, center=(0.0, 0.0, 0.0), spread=1.0, scale_range=(0.1, 0.6),
                    weight_range=(0.2, 4.0), sh_degree=0) -> Gaussian3D:
    mean = np.asarray(center, dtype=float) + rng.uniform(-spread, spread, size=3)
    scale = rng.uniform(*scale_range, size=3)
    sh = rng.normal(scale=0.3, size=((sh_degree + 1) ** 2, 3))
    sh[0] = (rng.uniform(0.05, 0.95, size=3) - 0.5) / 0.28209479177387814
    return Gaussian3D.create(rng.uniform(*weight_range), mean, scale, random_rotation(rng), sh=sh)


def random_scene(rng: np.random.Generator, count: int, **kwargs) -> Scene:
    return Scene([random_gaussian(rng, **kwargs) for _ in range(count)], rng.uniform(0.0, 0.1, size=3))


def orbit_camera(angle_deg: float, radius=4.5, height=-0.8, size=256, fov_deg=45.0) -> Camera:
    a = math.radians(angle_deg)
    eye = (radius * math.sin(a), height, -radius * math.cos(a))
    return Camera.look_at(eye, (0.0, 0.0, 0.0), fov_deg=fov_deg, width=size, height=size)


def random_ray(rng: np.random.Generator, target=(0.0, 0.0, 0.0), distance=(3.0, 6.0), jitter=0.5):
    """Origin on a sphere around ``target`` and a unit direction aimed near it."""
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    origin = np.asarray(target, dtype=float) + rng.uniform(*distance) * d
    aim = np.asarray(target, dtype=float) + rng.uniform(-jitter, jitter, size=3)
    direction = aim - origin
    return origin, direction / np.linalg.norm(direction)
