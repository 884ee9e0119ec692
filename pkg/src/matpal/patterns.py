"""Parametric, toroidally periodic texture/material generators.

These power the offline texture backend and the synthetic ground-truth
dataset: every field is periodic over its tile by construction, and normals
come from an analytic height field so they are unit length with positive z.
"""
from __future__ import annotations

import dataclasses

import numpy as np
from scipy.ndimage import gaussian_filter

from .materials import MaterialMaps

PATTERN_KINDS = ("stripes", "bricks", "dots", "noise")


@dataclasses.dataclass(frozen=True)
class PatternParams:
    kind: str
    base_color: tuple[float, float, float]
    accent_color: tuple[float, float, float]
    cycles: int = 4            # integer wave count across the tile
    orientation_k: int = 0     # integer cross-axis wave count (keeps periodicity)
    relief: float = 1.5        # height-field amplitude scale
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")


def _grid(size: int):
    c = np.arange(size, dtype=np.float64) / size
    return np.meshgrid(c, c, indexing="ij")  # (y, x)


def height_field(params: PatternParams, size: int) -> np.ndarray:
    """Periodic height field in roughly [-1, 1]."""
    yy, xx = _grid(size)
    k = params.cycles
    q = params.orientation_k
    # phases put the wrap boundaries in smooth regions of each pattern
    if params.kind == "stripes":
        return np.cos(2 * np.pi * (k * xx + q * yy))
    if params.kind == "bricks":
        row = np.floor(yy * k + 0.5)
        shift = 0.5 * (row % 2)
        u = (xx * k + shift + 0.5) % 1.0
        v = (yy * k + 0.5) % 1.0
        mortar = 0.08
        edge = np.minimum.reduce([u, 1 - u, v, 1 - v])
        return np.clip(edge / mortar, 0.0, 1.0) * 2.0 - 1.0
    if params.kind == "dots":
        u = (xx * k) % 1.0 - 0.5
        v = (yy * k) % 1.0 - 0.5
        return np.exp(-((u * u + v * v) / (2 * 0.15 ** 2))) * 2.0 - 1.0
    # noise: random-phase band-limited spectrum, periodic via inverse FFT
    rng = np.random.default_rng(params.seed)
    fy = np.fft.fftfreq(size)[:, None] * size
    fx = np.fft.fftfreq(size)[None, :] * size
    radius = np.hypot(fx, fy)
    band = np.exp(-((radius - k) ** 2) / (2 * max(1.0, k / 2) ** 2))
    phase = np.exp(2j * np.pi * rng.uniform(size=(size, size)))
    field = np.real(np.fft.ifft2(band * phase))
    field -= field.mean()
    peak = np.abs(field).max()
    return field / (peak if peak > 0 else 1.0)


def normals_from_height(height: np.ndarray, amplitude: float) -> np.ndarray:
    """Unit normals of a periodic height field via central differences."""
    h = height * amplitude
    dx = (np.roll(h, -1, axis=1) - np.roll(h, 1, axis=1)) * 0.5 * h.shape[1]
    dy = (np.roll(h, -1, axis=0) - np.roll(h, 1, axis=0)) * 0.5 * h.shape[0]
    n = np.stack([-dx, -dy, np.ones_like(h) * 40.0], axis=-1)
    return (n / np.linalg.norm(n, axis=-1, keepdims=True)).astype(np.float32)


def albedo_field(params: PatternParams, size: int) -> np.ndarray:
    """Periodic RGB albedo in [0, 1]: base/accent colors mixed by the field."""
    t = (height_field(params, size) + 1.0) * 0.5
    base = np.asarray(params.base_color, dtype=np.float64)
    accent = np.asarray(params.accent_color, dtype=np.float64)
    rng = np.random.default_rng(params.seed + 1)
    grain = gaussian_filter(rng.uniform(-1, 1, (size, size)), 1.5) * 0.04
    albedo = t[..., None] * accent + (1.0 - t[..., None]) * base + grain[..., None]
    return np.clip(albedo, 0.0, 1.0).astype(np.float32)


def roughness_field(params: PatternParams, size: int) -> np.ndarray:
    """Smoothed noise mapped into [0.1, 0.9]."""
    rng = np.random.default_rng(params.seed + 2)
    r = gaussian_filter(rng.uniform(0, 1, (size, size)), size / 16.0)
    lo, hi = r.min(), r.max()
    r = (r - lo) / (hi - lo) if hi > lo else np.full_like(r, 0.5)
    return (0.1 + 0.8 * r)[..., None].astype(np.float32)


def material_from_params(params: PatternParams, size: int) -> MaterialMaps:
    h = height_field(params, size)
    return MaterialMaps(
        albedo_field(params, size),
        normals_from_height(h, params.relief),
        roughness_field(params, size),
    )


def rotate_hue(color: tuple[float, float, float], degrees: float) -> tuple:
    """Rotate an RGB color around the gray axis (hue rotation)."""
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    one3 = 1.0 / 3.0
    sq3 = np.sqrt(1.0 / 3.0)
    m = np.full((3, 3), one3 * (1.0 - cos))
    m += cos * np.eye(3)
    off = sq3 * sin
    m += off * np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=np.float64)
    out = m @ np.asarray(color, dtype=np.float64)
    return tuple(np.clip(out, 0.0, 1.0).tolist())


def mean_hue_degrees(image: np.ndarray) -> float:
    """Saturation-weighted circular mean hue of an RGB image, in degrees."""
    import cv2

    hsv = cv2.cvtColor(np.asarray(image, dtype=np.float32), cv2.COLOR_RGB2HSV)
    hue = np.deg2rad(hsv[..., 0])
    weight = hsv[..., 1] + 1e-8
    c = (np.cos(hue) * weight).sum()
    s = (np.sin(hue) * weight).sum()
    return float(np.rad2deg(np.arctan2(s, c)) % 360.0)
