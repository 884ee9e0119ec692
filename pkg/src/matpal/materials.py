"""Material data model: SVBRDF map triples, lighting configurations, map I/O.

Conventions: all in-memory images are float32 arrays in [0, 1], linear light.
Gamma (2.2) is applied only when albedo touches disk. Normal maps on disk use
the tangent-space encoding c = (n + 1) / 2.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import cv2
import numpy as np

from .errors import InvalidInputError, ShapeError

GAMMA = 2.2
NORMAL_Z_MIN = 1e-3
UNIT_TOL = 1e-5


@dataclasses.dataclass(frozen=True)
class LightingConfig:
    """One directional light / view pair on the upper hemisphere."""

    light_dir: tuple[float, float, float]
    view_dir: tuple[float, float, float]
    intensity: float = 1.0
    f0: float = 0.04

    def __post_init__(self):
        for name in ("light_dir", "view_dir"):
            d = np.asarray(getattr(self, name), dtype=np.float64)
            if d.shape != (3,) or not np.all(np.isfinite(d)):
                raise InvalidInputError(f"{name} must be a finite 3-vector")
            if abs(np.linalg.norm(d) - 1.0) > 1e-6:
                raise InvalidInputError(f"{name} must be unit length")
            if d[2] <= 0:
                raise InvalidInputError(f"{name} must have positive z")
        if not np.isfinite(self.intensity) or self.intensity < 0:
            raise InvalidInputError("intensity must be finite and >= 0")
        if not 0.0 <= self.f0 <= 1.0:
            raise InvalidInputError("f0 must lie in [0, 1]")


@dataclasses.dataclass(frozen=True)
class LossWeights:
    """Weighting of the regression term and the number of rendering views."""

    lambda_reg: float = 1.0
    view_count: int = 9

    def __post_init__(self):
        if self.lambda_reg < 0:
            raise InvalidInputError("lambda_reg must be >= 0")
        if self.view_count < 1:
            raise InvalidInputError("view_count must be >= 1")


@dataclasses.dataclass(frozen=True)
class RenderedImage:
    """Linear radiance clamped to [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ShapeError("rendered image must be HxWx3")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("rendered image must be finite")
        if p.min() < 0 or p.max() > 1:
            raise InvalidInputError("rendered image must lie in [0, 1]")


@dataclasses.dataclass(frozen=True)
class MaterialMaps:
    """The SVBRDF triple: per-pixel albedo, unit surface normals, roughness."""

    albedo: np.ndarray      # HxWx3 in [0, 1], linear
    normals: np.ndarray     # HxWx3 unit vectors, z > 0
    roughness: np.ndarray   # HxWx1 in [0, 1]

    def __post_init__(self):
        a, n, r = self.albedo, self.normals, self.roughness
        if a.ndim != 3 or a.shape[2] != 3 or n.shape != a.shape:
            raise ShapeError("albedo and normals must be HxWx3 with equal shape")
        if r.shape != (a.shape[0], a.shape[1], 1):
            raise ShapeError("roughness must be HxWx1 matching albedo")
        for name, arr in (("albedo", a), ("normals", n), ("roughness", r)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be finite")
        if a.min() < 0 or a.max() > 1 or r.min() < 0 or r.max() > 1:
            raise InvalidInputError("albedo and roughness must lie in [0, 1]")
        norms = np.linalg.norm(n, axis=-1)
        if np.abs(norms - 1.0).max() > UNIT_TOL:
            raise InvalidInputError("normals must be unit length within 1e-5")
        if n[..., 2].min() < NORMAL_Z_MIN:
            raise InvalidInputError("normal z-components must be >= 1e-3")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.albedo.shape[0], self.albedo.shape[1]

    def stacked_channels(self) -> np.ndarray:
        """Concatenate {A, encoded N, R} into an HxWx7 array (loss domain)."""
        return np.concatenate(
            [self.albedo, encode_normals(self.normals), self.roughness], axis=-1
        )


def decode_normals(image: np.ndarray) -> np.ndarray:
    """Decode a tangent-space color image into a unit normal field.

    Degenerate pixels (near-zero vector or z below the floor after
    normalization) decode to (0, 0, 1).
    """
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError("normal image must be HxWx3")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("normal image must be finite")
    v = img * 2.0 - 1.0
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    bad = (length[..., 0] < 1e-6)
    n = v / np.maximum(length, 1e-12)
    bad |= n[..., 2] < NORMAL_Z_MIN
    n[bad] = (0.0, 0.0, 1.0)
    return n.astype(np.float32)


def encode_normals(normals: np.ndarray) -> np.ndarray:
    """Map unit normals back to [0, 1] colors via c = (n + 1) / 2."""
    return ((np.asarray(normals, dtype=np.float32) + 1.0) * 0.5).clip(0.0, 1.0)


def flat_normals(h: int, w: int) -> np.ndarray:
    n = np.zeros((h, w, 3), dtype=np.float32)
    n[..., 2] = 1.0
    return n


# --- disk I/O -----------------------------------------------------------

def _write_png(path: Path, arr: np.ndarray, bits: int = 8) -> None:
    arr = np.clip(arr, 0.0, 1.0)
    if bits == 16:
        data = np.round(arr * 65535.0).astype(np.uint16)
    else:
        data = np.round(arr * 255.0).astype(np.uint8)
    if data.ndim == 3 and data.shape[2] == 3:
        data = cv2.cvtColor(data, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), data):
        raise IOError(f"failed to write {path}")


def _read_png(path: Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidInputError(f"cannot read image {path}")
    if raw.ndim == 3 and raw.shape[2] == 4:
        raw = raw[..., :3]
    if raw.ndim == 3 and raw.shape[2] == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    return (raw.astype(np.float32) / scale)


def load_image(path: str | Path) -> np.ndarray:
    """Read an RGB image as float32 HxWx3 in [0, 1] (no gamma handling)."""
    img = _read_png(Path(path))
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    return img


def save_image(path: str | Path, image: np.ndarray, bits: int = 8) -> None:
    _write_png(Path(path), np.asarray(image, dtype=np.float32), bits)


def save_material(directory: str | Path, m: MaterialMaps) -> dict[str, str]:
    """Write albedo (gamma 2.2), normal (16-bit encoded) and roughness PNGs."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "albedo": d / "albedo.png",
        "normal": d / "normal.png",
        "roughness": d / "roughness.png",
    }
    _write_png(paths["albedo"], np.power(m.albedo, 1.0 / GAMMA), bits=8)
    _write_png(paths["normal"], encode_normals(m.normals), bits=16)
    _write_png(paths["roughness"], m.roughness[..., 0], bits=8)
    return {k: str(v) for k, v in paths.items()}


def load_material(directory: str | Path) -> MaterialMaps:
    d = Path(directory)
    albedo = np.power(load_image(d / "albedo.png"), GAMMA).astype(np.float32)
    normals = decode_normals(load_image(d / "normal.png"))
    rough = _read_png(d / "roughness.png")
    if rough.ndim == 3:
        rough = rough[..., 0]
    return MaterialMaps(albedo, normals, rough[..., None].astype(np.float32))
