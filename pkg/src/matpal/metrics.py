"""Evaluation machinery: per-map MSE/SSIM, relative-improvement aggregation,
a reference perceptual distance, FID/KID over pluggable embeddings, and the
class-resemblance / re-rendering comparison protocols."""
from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidInputError, ShapeError, UndefinedRatioError
from .materials import MaterialMaps, encode_normals

MAP_KEYS = ("albedo", "normals", "roughness")


# --- pixel metrics ------------------------------------------------------

def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    if a.shape != b.shape:
        raise ShapeError("mse inputs must share shape")
    return float(((a - b) ** 2).mean())


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def _window_means(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # 'valid' windowed weighted means via direct correlation
    from scipy.signal import correlate2d

    return correlate2d(img, kernel, mode="valid")


def ssim(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """SSIM with an 11x11 Gaussian window (sigma 1.5), dynamic range 1,
    averaged over valid windows and channels."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    if a.shape != b.shape:
        raise ShapeError("ssim inputs must share shape")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    kernel = _gaussian_kernel()
    c1, c2 = k1 ** 2, k2 ** 2
    vals = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mu_x = _window_means(x, kernel)
        mu_y = _window_means(y, kernel)
        var_x = _window_means(x * x, kernel) - mu_x ** 2
        var_y = _window_means(y * y, kernel) - mu_y ** 2
        cov = _window_means(x * y, kernel) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


# --- report aggregation -------------------------------------------------

@dataclasses.dataclass
class EvalReport:
    """Per-map MSE/SSIM plus bookkeeping for one evaluated model/condition."""

    map_mse: dict[str, float]
    map_ssim: dict[str, float]
    sample_count: int = 0
    seeds: tuple[int, ...] = ()
    delta_percent: float | None = None
    baseline_name: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def material_eval(pred: MaterialMaps, truth: MaterialMaps) -> tuple[dict, dict]:
    """MSE and SSIM per map; normals are compared in their encoded form."""
    pairs = {
        "albedo": (pred.albedo, truth.albedo),
        "normals": (encode_normals(pred.normals), encode_normals(truth.normals)),
        "roughness": (pred.roughness[..., 0], truth.roughness[..., 0]),
    }
    return (
        {k: mse(p, t) for k, (p, t) in pairs.items()},
        {k: ssim(p, t) for k, (p, t) in pairs.items()},
    )


def delta_percent(ours: EvalReport, baseline: EvalReport) -> float:
    """Signed mean relative improvement over 3 maps x 2 metrics, in percent.
    MSE improves downward, SSIM upward."""
    terms = []
    for key in MAP_KEYS:
        base_mse = baseline.map_mse[key]
        base_ssim = baseline.map_ssim[key]
        if base_mse == 0 or base_ssim == 0:
            raise UndefinedRatioError(f"baseline {key} metric is zero")
        terms.append((base_mse - ours.map_mse[key]) / base_mse)
        terms.append((ours.map_ssim[key] - base_ssim) / base_ssim)
    return float(np.mean(terms) * 100.0)


# --- perceptual distance ------------------------------------------------

def _contrast_normalize(img: np.ndarray, sigma: float = 2.0, eps: float = 0.01):
    mu = gaussian_filter(img, sigma=(sigma, sigma, 0) if img.ndim == 3 else sigma)
    var = gaussian_filter(img * img, sigma=(sigma, sigma, 0) if img.ndim == 3 else sigma) - mu * mu
    return (img - mu) / (np.sqrt(np.maximum(var, 0.0)) + eps), mu


def perceptual_distance(a: np.ndarray, b: np.ndarray, levels: int = 4) -> float:
    """Reference perceptual metric: mean over a Gaussian pyramid of the L1
    distance between locally contrast-normalized images plus the L1 distance
    of the local means. Symmetric, zero for identical inputs."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    if a.shape != b.shape:
        raise ShapeError("perceptual_distance inputs must share shape")
    total = 0.0
    for level in range(levels):
        ca, ma = _contrast_normalize(a)
        cb, mb = _contrast_normalize(b)
        total += np.abs(ca - cb).mean() + np.abs(ma - mb).mean()
        if min(a.shape[0], a.shape[1]) >= 8 and level < levels - 1:
            a = cv2.pyrDown(a.astype(np.float32)).astype(np.float64)
            b = cv2.pyrDown(b.astype(np.float32)).astype(np.float64)
    return float(total / levels)


# --- distribution metrics ----------------------------------------------

@dataclasses.dataclass(frozen=True)
class EmbeddingExtractor:
    """A named deterministic image -> fixed-dimension feature function."""

    name: str
    dimension: int
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, image: np.ndarray) -> np.ndarray:
        v = np.asarray(self.fn(image), dtype=np.float64)
        if v.shape != (self.dimension,):
            raise ShapeError(f"extractor {self.name} emitted shape {v.shape}")
        return v


def patch_stats_extractor(dimension: int = 64, seed: int = 7) -> EmbeddingExtractor:
    """Default embedding: per-patch (mean, std, gradient energy) statistics on
    an 8x8 grid of a 64px resize, random-projected to the target dimension."""
    rng = np.random.default_rng(seed)
    raw_dim = 8 * 8 * 3 * 3
    proj = rng.standard_normal((raw_dim, dimension)) / np.sqrt(raw_dim)

    def fn(image: np.ndarray) -> np.ndarray:
        img = np.asarray(image, dtype=np.float32)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=-1)
        img = cv2.resize(img, (64, 64), interpolation=cv2.INTER_AREA)
        feats = []
        gx = np.diff(img, axis=1, append=img[:, -1:])
        gy = np.diff(img, axis=0, append=img[-1:, :])
        energy = gx * gx + gy * gy
        for py in range(8):
            for px in range(8):
                patch = img[py * 8:(py + 1) * 8, px * 8:(px + 1) * 8]
                e = energy[py * 8:(py + 1) * 8, px * 8:(px + 1) * 8]
                feats.extend(patch.mean(axis=(0, 1)))
                feats.extend(patch.std(axis=(0, 1)))
                feats.extend(e.mean(axis=(0, 1)))
        return np.asarray(feats, dtype=np.float64) @ proj

    return EmbeddingExtractor("patch-stats", dimension, fn)


def _embed_set(images: Sequence[np.ndarray], extractor: EmbeddingExtractor) -> np.ndarray:
    return np.stack([extractor(im) for im in images])


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) * 0.5)
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


FID_JITTER = 1e-6


def fid(images_a: Sequence[np.ndarray], images_b: Sequence[np.ndarray],
        extractor: EmbeddingExtractor) -> float:
    """Frechet distance between Gaussian fits of the two embedded sets."""
    d = extractor.dimension
    if len(images_a) < d + 1 or len(images_b) < d + 1:
        raise InvalidInputError(f"fid needs at least {d + 1} images per set")
    ea, eb = _embed_set(images_a, extractor), _embed_set(images_b, extractor)
    mu_a, mu_b = ea.mean(0), eb.mean(0)
    ca = np.cov(ea, rowvar=False)
    cb = np.cov(eb, rowvar=False)
    ja = ca + FID_JITTER * np.eye(d)
    jb = cb + FID_JITTER * np.eye(d)
    sa = _sqrtm_psd(ja)
    cross = _sqrtm_psd(sa @ jb @ sa)
    mean_term = float(((mu_a - mu_b) ** 2).sum())
    return mean_term + float(np.trace(ca) + np.trace(cb) - 2.0 * np.trace(cross))


def kid(images_a: Sequence[np.ndarray], images_b: Sequence[np.ndarray],
        extractor: EmbeddingExtractor) -> float:
    """Unbiased polynomial-kernel (degree 3, c = 1, scaled by 1/dim) MMD^2."""
    if len(images_a) < 2 or len(images_b) < 2:
        raise InvalidInputError("kid needs at least 2 images per set")
    x = _embed_set(images_a, extractor)
    y = _embed_set(images_b, extractor)
    d = extractor.dimension

    def k(u, v):
        return (u @ v.T / d + 1.0) ** 3

    m, n = len(x), len(y)
    kxx = k(x, x)
    kyy = k(y, y)
    kxy = k(x, y)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sum_xx + sum_yy - 2.0 * kxy.mean())


# --- protocols ----------------------------------------------------------

def _material_distance(a: MaterialMaps, b: MaterialMaps) -> dict[str, float]:
    return {
        "albedo": perceptual_distance(a.albedo, b.albedo),
        "normals": perceptual_distance(encode_normals(a.normals), encode_normals(b.normals)),
        "roughness": perceptual_distance(a.roughness[..., 0], b.roughness[..., 0]),
    }


def resemblance_protocol(
    extracted_by_class: dict[str, list[MaterialMaps]],
    library_by_class: dict[str, list[MaterialMaps]],
    pairs_per_class: int = 100,
    seed: int = 0,
) -> dict[str, dict[str, float]]:
    """Per-map perceptual distance of same-class pairs (``ours``) against
    mismatched-class pairs (``upper_bound``), averaged over classes."""
    rng = np.random.default_rng(seed)
    classes = sorted(set(extracted_by_class) & set(library_by_class))
    usable = [c for c in classes
              if extracted_by_class[c] and library_by_class[c]]
    if not usable:
        raise InvalidInputError("no class has items on both sides")
    if len(usable) < 2:
        raise InvalidInputError("upper bound needs at least 2 classes")
    ours = {k: [] for k in MAP_KEYS}
    upper = {k: [] for k in MAP_KEYS}
    for c in usable:
        ours_c = {k: [] for k in MAP_KEYS}
        upper_c = {k: [] for k in MAP_KEYS}
        others = [o for o in usable if o != c]
        for _ in range(pairs_per_class):
            ext = extracted_by_class[c][rng.integers(len(extracted_by_class[c]))]
            lib = library_by_class[c][rng.integers(len(library_by_class[c]))]
            for k, v in _material_distance(ext, lib).items():
                ours_c[k].append(v)
            cbar = others[rng.integers(len(others))]
            mis = library_by_class[cbar][rng.integers(len(library_by_class[cbar]))]
            for k, v in _material_distance(ext, mis).items():
                upper_c[k].append(v)
        for k in MAP_KEYS:
            ours[k].append(np.mean(ours_c[k]))
            upper[k].append(np.mean(upper_c[k]))
    return {
        "ours": {k: float(np.mean(v)) for k, v in ours.items()},
        "upper_bound": {k: float(np.mean(v)) for k, v in upper.items()},
    }


def rerender_compare(
    conditions: dict[str, list[tuple[MaterialMaps, MaterialMaps]]]
) -> list[dict]:
    """Per-map mean perceptual distance per named condition, best first."""
    if not conditions:
        raise InvalidInputError("no conditions supplied")
    rows = []
    for name, pairs in conditions.items():
        if not pairs:
            raise InvalidInputError(f"condition {name} has no pairs")
        dists = {k: [] for k in MAP_KEYS}
        for truth, extracted in pairs:
            for k, v in _material_distance(extracted, truth).items():
                dists[k].append(v)
        row = {"condition": name}
        row.update({k: float(np.mean(v)) for k, v in dists.items()})
        row["mean"] = float(np.mean([row[k] for k in MAP_KEYS]))
        rows.append(row)
    return sorted(rows, key=lambda r: r["mean"])


def format_table(rows: list[dict]) -> str:
    """Aligned-text rendering of a list of uniform dict rows."""
    if not rows:
        return ""
    keys = list(rows[0].keys())
    cells = [[str(k) for k in keys]]
    for r in rows:
        cells.append([f"{r[k]:.4f}" if isinstance(r[k], float) else str(r[k]) for k in keys])
    widths = [max(len(row[i]) for row in cells) for i in range(len(keys))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells)
