"""Region masks and scale-adaptive square crop extraction."""
from __future__ import annotations

import dataclasses
from pathlib import Path

import cv2
import numpy as np

from .errors import EmptyRegionError, InvalidInputError, RegionTooFragmentedError
from .materials import load_image

MASK_THRESHOLD = 127  # 8-bit masks: value > 127 counts as inside
MAX_PROPOSALS = 10_000

# Region color coding for overlays/reports, in palette order.
REGION_PALETTE = [
    (220, 50, 47),   # red
    (38, 139, 210),  # blue
    (133, 153, 0),   # green
    (108, 113, 196), # purple
    (203, 75, 22),   # orange
    (42, 161, 152),  # teal
]


@dataclasses.dataclass(frozen=True)
class CropConfig:
    c_x: int = 512                  # crop side length in source pixels
    c_in: int = 256                 # training input side length
    max_crops: int = 16
    coverage_fraction: float = 0.95

    def __post_init__(self):
        if self.c_x < 8:
            raise InvalidInputError("c_x must be >= 8")
        if self.c_in < 64:
            raise InvalidInputError("c_in must be >= 64")
        if not 0.0 < self.coverage_fraction <= 1.0:
            raise InvalidInputError("coverage_fraction must be in (0, 1]")
        if self.max_crops < 1:
            raise InvalidInputError("max_crops must be >= 1")


def load_mask(path: str | Path) -> np.ndarray:
    """Read an 8-bit mask image; any value > 127 counts as inside."""
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise InvalidInputError(f"cannot read mask {path}")
    return raw > MASK_THRESHOLD


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    cv2.imwrite(str(path), np.where(mask, 255, 0).astype(np.uint8))


def largest_square(mask: np.ndarray) -> int:
    """Side of the largest all-inside axis-aligned square, by the classic
    dynamic program s[y][x] = 1 + min of the three upper/left neighbors."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyRegionError("mask has no inside pixels")
    h, w = m.shape
    s = np.zeros((h, w), dtype=np.int32)
    s[0, :] = m[0, :]
    s[:, 0] = m[:, 0]
    for y in range(1, h):
        row = s[y]
        prev = s[y - 1]
        for x in range(1, w):
            if m[y, x]:
                row[x] = 1 + min(prev[x], row[x - 1], prev[x - 1])
    return int(s.max())


def _coverage(mask_int: np.ndarray, x: int, y: int, side: int) -> float:
    # mask_int is an inclusive summed-area table padded by one row/col of zeros
    total = (
        mask_int[y + side, x + side]
        - mask_int[y, x + side]
        - mask_int[y + side, x]
        + mask_int[y, x]
    )
    return total / float(side * side)


def sample_crops(
    image: np.ndarray,
    mask: np.ndarray,
    cfg: CropConfig = CropConfig(),
    seed: int = 0,
) -> list[np.ndarray]:
    """Rejection-sample square windows covered by the mask and resize each to
    c_in x c_in (bilinear). Deterministic given the seed."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyRegionError("mask has no inside pixels")
    side_max = largest_square(m)
    if side_max < 8:
        raise EmptyRegionError("largest inside square is below 8 pixels")
    side = min(cfg.c_x, side_max)
    h, w = m.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = np.cumsum(np.cumsum(m.astype(np.int64), axis=0), axis=1)

    rng = np.random.default_rng(seed)
    crops: list[np.ndarray] = []
    for _ in range(MAX_PROPOSALS):
        if len(crops) >= cfg.max_crops:
            break
        x = int(rng.integers(0, w - side + 1))
        y = int(rng.integers(0, h - side + 1))
        if _coverage(integral, x, y, side) < cfg.coverage_fraction:
            continue
        window = np.asarray(image, dtype=np.float32)[y:y + side, x:x + side]
        crops.append(
            cv2.resize(window, (cfg.c_in, cfg.c_in), interpolation=cv2.INTER_LINEAR)
        )
    if not crops:
        raise RegionTooFragmentedError(
            f"no {side}x{side} window reached coverage {cfg.coverage_fraction} "
            f"after {MAX_PROPOSALS} proposals"
        )
    return crops
