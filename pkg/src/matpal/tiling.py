"""Tileability machinery: toroidal rolling, periodic Poisson seam removal,
seam scoring and weighted blending of overlapping patches."""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import CoverageError, InvalidInputError


@dataclasses.dataclass(frozen=True)
class SeamReport:
    """Mean absolute pixel difference across the two wrap boundaries."""

    horizontal_seam: float   # left/right wrap (column W-1 vs 0)
    vertical_seam: float     # top/bottom wrap (row H-1 vs 0)

    @property
    def combined(self) -> float:
        return 0.5 * (self.horizontal_seam + self.vertical_seam)


def roll(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Toroidal shift: out[y][x] = in[(y - dy) mod H][(x - dx) mod W]."""
    return np.roll(np.roll(image, dy, axis=0), dx, axis=1)


def seam_score(image: np.ndarray) -> SeamReport:
    img = np.asarray(image, dtype=np.float64)
    h = float(np.abs(img[:, -1] - img[:, 0]).mean())
    v = float(np.abs(img[-1, :] - img[0, :]).mean())
    return SeamReport(h, v)


def wrap_consistent_gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences of the image treated as periodic, with the two
    wrap-crossing difference lines replaced by the average of their adjacent
    interior gradients."""
    img = np.asarray(image, dtype=np.float64)
    gx = np.roll(img, -1, axis=1) - img
    gy = np.roll(img, -1, axis=0) - img
    gx[:, -1] = 0.5 * (gx[:, -2] + gx[:, 0])
    gy[-1, :] = 0.5 * (gy[-2, :] + gy[0, :])
    return gx, gy


def divergence(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Backward-difference divergence of a periodic forward-gradient field."""
    return (gx - np.roll(gx, 1, axis=1)) + (gy - np.roll(gy, 1, axis=0))


def laplacian(u: np.ndarray) -> np.ndarray:
    return (
        np.roll(u, -1, axis=1) + np.roll(u, 1, axis=1)
        + np.roll(u, -1, axis=0) + np.roll(u, 1, axis=0)
        - 4.0 * u
    )


def solve_periodic_poisson(div: np.ndarray, mean: np.ndarray | float) -> np.ndarray:
    """Solve the periodic discrete Poisson equation lap(u) = div per channel
    via FFT, pinning the per-channel mean of the solution."""
    div = np.asarray(div, dtype=np.float64)
    h, w = div.shape[:2]
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    denom = 2.0 * np.cos(2 * np.pi * fx) + 2.0 * np.cos(2 * np.pi * fy) - 4.0
    denom[0, 0] = 1.0  # DC handled separately
    if div.ndim == 3:
        denom = denom[..., None]
    spec = np.fft.fft2(div, axes=(0, 1)) / denom
    if div.ndim == 3:
        spec[0, 0, :] = 0.0
    else:
        spec[0, 0] = 0.0
    u = np.real(np.fft.ifft2(spec, axes=(0, 1)))
    return u - u.mean(axis=(0, 1)) + np.asarray(mean)


def poisson_blend(image: np.ndarray, clip: bool = True) -> np.ndarray:
    """Remove wrap-boundary seams by solving the periodic Poisson equation
    against the seam-corrected gradient field; recenters to the input mean.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.shape[0] < 4 or img.shape[1] < 4:
        raise InvalidInputError("poisson_blend needs an image of at least 4x4")
    gx, gy = wrap_consistent_gradients(img)
    u = solve_periodic_poisson(divergence(gx, gy), img.mean(axis=(0, 1)))
    if clip:
        u = np.clip(u, 0.0, 1.0)
    return u.astype(np.float32)


def _axis_weights(length: int, offset: int, canvas: int) -> np.ndarray:
    """Raised-cosine (Hann) profile over one patch axis. Halves touching a
    canvas edge are flattened to 1 so borders stay at full weight there."""
    i = np.arange(length, dtype=np.float64)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * (i + 0.5) / length)
    half = length // 2
    if offset == 0:
        w[:half] = 1.0
    if offset + length == canvas:
        w[half:] = 1.0
    return np.maximum(w, 1e-6)


def blend_patches(
    patches: list[tuple[np.ndarray, int, int]], canvas_size: tuple[int, int]
) -> np.ndarray:
    """Weighted average of overlapping patches placed at (x, y) offsets."""
    ch, cw = canvas_size
    first = np.asarray(patches[0][0])
    nchan = first.shape[2] if first.ndim == 3 else 1
    acc = np.zeros((ch, cw, nchan), dtype=np.float64)
    wacc = np.zeros((ch, cw, 1), dtype=np.float64)
    for img, x, y in patches:
        img = np.asarray(img, dtype=np.float64)
        if img.ndim == 2:
            img = img[..., None]
        ph, pw = img.shape[:2]
        if x < 0 or y < 0 or x + pw > cw or y + ph > ch:
            raise InvalidInputError(f"patch at ({x},{y}) size ({pw}x{ph}) exceeds canvas")
        w = (_axis_weights(ph, y, ch)[:, None] * _axis_weights(pw, x, cw)[None, :])[..., None]
        acc[y:y + ph, x:x + pw] += img * w
        wacc[y:y + ph, x:x + pw] += w
    uncovered = np.argwhere(wacc[..., 0] == 0.0)
    if uncovered.size:
        yy, xx = uncovered[0]
        raise CoverageError(int(xx), int(yy))
    out = acc / wacc
    if first.ndim == 2:
        out = out[..., 0]
    return out.astype(np.float32)
