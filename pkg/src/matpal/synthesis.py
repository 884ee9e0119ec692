"""Texture candidate generation per region: concept learning from crops,
tileable candidate synthesis, and perceptual selection.

Two interchangeable backends exist: a deterministic procedural backend that
fits parametric generators to crop statistics (fully offline), and a remote
client speaking the JSON/HTTP wire protocol of an external diffusion service.
"""
from __future__ import annotations

import base64
import dataclasses
import hashlib
import io
import json
from typing import Callable, Sequence

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from . import prompts
from .errors import BackendError, InvalidInputError
from .metrics import perceptual_distance
from .patterns import PATTERN_KINDS, PatternParams, height_field
from .tiling import SeamReport, blend_patches, poisson_blend, roll, seam_score

TILEABLE_SEAM_MAX = 0.02
MIN_RESOLUTION, MAX_RESOLUTION = 256, 4096


@dataclasses.dataclass(frozen=True)
class ConceptHandle:
    """Opaque reference to one learned material concept."""

    concept_id: str
    backend_id: str
    created_from: tuple[str, ...]   # crop digests
    prompt_train: str


@dataclasses.dataclass(frozen=True)
class TextureCandidate:
    image: np.ndarray
    concept: ConceptHandle | str
    prompt: str
    seed: int
    tileable: bool
    seam: SeamReport
    patches_used: int = 1

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != self.image.shape[1]:
            raise InvalidInputError("candidate image must be square HxWx3")
        if self.tileable and self.seam.combined > TILEABLE_SEAM_MAX:
            raise InvalidInputError(
                f"tileable candidate has seam {self.seam.combined:.4f} > {TILEABLE_SEAM_MAX}")

    @property
    def resolution(self) -> int:
        return self.image.shape[0]


def crop_digest(crop: np.ndarray) -> str:
    q = np.round(np.asarray(crop, np.float64) * 65535).astype(np.uint16)
    return hashlib.sha256(q.tobytes()).hexdigest()


# --- procedural backend -------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TextureStats:
    """Crop statistics a parametric generator is fitted to."""

    mean_color: tuple[float, float, float]
    std_color: tuple[float, float, float]
    kind: str
    cycles: int
    orientation_k: int


def _dominant_orientation(gray: np.ndarray) -> float:
    """Structure-tensor orientation of the dominant gradient axis (radians)."""
    gx = cv2.Sobel(gray, cv2.CV_64F, 1, 0, ksize=3)
    gy = cv2.Sobel(gray, cv2.CV_64F, 0, 1, ksize=3)
    jxx, jyy, jxy = (gx * gx).mean(), (gy * gy).mean(), (gx * gy).mean()
    return 0.5 * np.arctan2(2 * jxy, jxx - jyy)


def _spectral_peak(gray: np.ndarray) -> tuple[float, float]:
    """Dominant spatial frequency (cycles per image) and its relative power."""
    f = np.abs(np.fft.fft2(gray - gray.mean()))
    f[0, 0] = 0.0
    size = gray.shape[0]
    fy = np.fft.fftfreq(size)[:, None] * size
    fx = np.fft.fftfreq(size)[None, :] * size
    radius = np.hypot(fx, fy)
    peak_idx = np.unravel_index(np.argmax(f), f.shape)
    total = f.sum()
    share = float(f[peak_idx] / total) if total > 0 else 0.0
    return float(radius[peak_idx]), share


def fit_stats(crops: Sequence[np.ndarray]) -> TextureStats:
    stack = np.stack([np.asarray(c, np.float64) for c in crops])
    mean = tuple(stack.mean(axis=(0, 1, 2)).tolist())
    std = tuple(stack.std(axis=(0, 1, 2)).tolist())
    gray = stack.mean(axis=(0, 3))
    freq, share = _spectral_peak(gray)
    theta = _dominant_orientation(gray)
    aniso = abs(np.cos(theta))
    if float(np.mean(std)) < 0.02:
        kind = "noise"
        cycles = 3
    elif share > 0.08:
        kind = "stripes" if aniso > 0.5 else "dots"
        cycles = int(np.clip(round(freq), 2, 6))
    else:
        kind = "noise"
        cycles = int(np.clip(round(freq), 2, 6))
    return TextureStats(mean, std, kind, cycles, 0)


CLASS_PRESETS = {
    "stripes": TextureStats((0.65, 0.35, 0.3), (0.18, 0.12, 0.1), "stripes", 4, 0),
    "bricks": TextureStats((0.45, 0.3, 0.25), (0.12, 0.1, 0.09), "bricks", 4, 0),
    "dots": TextureStats((0.35, 0.5, 0.4), (0.12, 0.12, 0.1), "dots", 4, 0),
    "noise": TextureStats((0.5, 0.5, 0.5), (0.1, 0.1, 0.1), "noise", 3, 0),
}


def _class_stats(token: str) -> TextureStats:
    for kind in PATTERN_KINDS:
        if kind in token:
            return CLASS_PRESETS[kind]
    h = int(hashlib.sha256(token.encode()).hexdigest(), 16)
    kind = PATTERN_KINDS[h % len(PATTERN_KINDS)]
    rng = np.random.default_rng(h % (2 ** 31))
    mean = tuple(rng.uniform(0.25, 0.75, 3).tolist())
    return dataclasses.replace(CLASS_PRESETS[kind], mean_color=mean)


def render_texture(stats: TextureStats, resolution: int, seed: int) -> np.ndarray:
    """Periodic RGB texture matching the fitted mean/std statistics."""
    params = PatternParams(
        kind=stats.kind, base_color=(0, 0, 0), accent_color=(1, 1, 1),
        cycles=stats.cycles, orientation_k=stats.orientation_k, seed=seed,
    )
    field = height_field(params, resolution)
    field = gaussian_filter(field, sigma=resolution / 256.0, mode="wrap")
    rng = np.random.default_rng(seed + 101)
    grain = gaussian_filter(rng.uniform(-1, 1, (resolution, resolution)),
                            sigma=2.0, mode="wrap")
    field = field + 0.25 * grain / max(np.abs(grain).max(), 1e-9)
    field = field - field.mean()
    fstd = field.std()
    out = np.empty((resolution, resolution, 3), dtype=np.float32)
    for c in range(3):
        scale = stats.std_color[c] / fstd if fstd > 1e-9 else 0.0
        out[..., c] = stats.mean_color[c] + field * scale
    return np.clip(out, 0.0, 1.0)


class ProceduralBackend:
    """Deterministic offline backend: concepts are fitted texture statistics."""

    backend_id = "procedural"
    native_max = 1024

    def __init__(self):
        self._concepts: dict[str, TextureStats] = {}

    def health(self) -> dict:
        return {"status": "ok"}

    def learn_concept(self, crops: Sequence[np.ndarray], prompt_train: str,
                      steps: int = 0, seed: int = 0) -> str:
        digests = tuple(crop_digest(c) for c in crops)
        concept_id = hashlib.sha256(
            json.dumps([self.backend_id, digests, prompt_train, seed]).encode()
        ).hexdigest()[:16]
        self._concepts[concept_id] = fit_stats(crops)
        return concept_id

    def _stats(self, concept_or_class: str) -> TextureStats:
        if concept_or_class in self._concepts:
            return self._concepts[concept_or_class]
        return _class_stats(concept_or_class)

    def generate_images(self, concept_or_class: str, prompt: str, resolution: int,
                        n: int, tileable: bool, seed: int) -> list[np.ndarray]:
        stats = self._stats(concept_or_class)
        # textures are periodic by construction with wrap boundaries phase
        # aligned to smooth regions, so the tileable flag needs no extra work
        return [render_texture(stats, resolution, seed + i).astype(np.float32)
                for i in range(n)]


# --- remote backend -----------------------------------------------------

def _png_b64(image: np.ndarray) -> str:
    data = np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)
    ok, buf = cv2.imencode(".png", cv2.cvtColor(data, cv2.COLOR_RGB2BGR))
    if not ok:
        raise BackendError("png encoding failed")
    return base64.b64encode(buf.tobytes()).decode()


def _b64_png(data: str) -> np.ndarray:
    buf = np.frombuffer(base64.b64decode(data), dtype=np.uint8)
    img = cv2.imdecode(buf, cv2.IMREAD_COLOR)
    if img is None:
        raise BackendError("png decoding failed")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


class RemoteBackend:
    """Client for a diffusion service speaking the JSON/HTTP texture protocol."""

    backend_id = "remote"
    native_max = 1024

    FINETUNE_TIMEOUT = 600.0
    GENERATE_TIMEOUT = 120.0

    def __init__(self, base_url: str, transport=None, retries: int = 2):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self._client = httpx.Client(
            base_url=self.base_url, transport=transport)

    def _post(self, path: str, payload: dict, timeout: float) -> dict:
        import httpx

        last = None
        for _ in range(self.retries + 1):
            try:
                resp = self._client.post(path, json=payload, timeout=timeout)
            except httpx.HTTPError as exc:
                last = BackendError(f"backend unreachable: {exc}", retryable=True)
                continue
            if resp.status_code >= 400:
                try:
                    err = resp.json()
                except Exception:
                    err = {"code": str(resp.status_code), "message": resp.text}
                raise BackendError(err.get("message", "backend error"),
                                   code=err.get("code"))
            return resp.json()
        raise last

    def health(self) -> dict:
        import httpx

        try:
            return self._client.get("/v1/health", timeout=10.0).json()
        except httpx.HTTPError as exc:
            raise BackendError(f"backend unreachable: {exc}", retryable=True)

    def learn_concept(self, crops, prompt_train: str, steps: int = 800,
                      seed: int = 0) -> str:
        payload = {
            "images": [_png_b64(c) for c in crops],
            "prompt_train": prompt_train, "steps": steps, "seed": seed,
        }
        return self._post("/v1/concepts", payload, self.FINETUNE_TIMEOUT)["concept_id"]

    def generate_images(self, concept_or_class: str, prompt: str, resolution: int,
                        n: int, tileable: bool, seed: int) -> list[np.ndarray]:
        payload = {
            "concept_id": concept_or_class, "prompt": prompt,
            "width": resolution, "height": resolution,
            "n": n, "tileable": tileable, "seed": seed,
        }
        out = self._post("/v1/generate", payload, self.GENERATE_TIMEOUT)
        return [_b64_png(im) for im in out["images"]]


# --- operations ---------------------------------------------------------

def learn_concept(backend, crops: Sequence[np.ndarray],
                  prompt_train: str | None = None, seed: int = 0) -> ConceptHandle:
    """Learn one material concept from region crops."""
    if not crops:
        raise InvalidInputError("learn_concept needs at least one crop")
    sides = {c.shape[0] for c in crops} | {c.shape[1] for c in crops}
    if len(sides) != 1:
        raise InvalidInputError("all crops must be square and equally sized")
    prompt_train = prompt_train or prompts.train_prompt()
    concept_id = backend.learn_concept(crops, prompt_train, seed=seed)
    return ConceptHandle(
        concept_id=concept_id, backend_id=backend.backend_id,
        created_from=tuple(crop_digest(c) for c in crops),
        prompt_train=prompt_train,
    )


def _patch_layout(resolution: int, native: int) -> list[tuple[int, int]]:
    stride = native // 2
    starts = sorted({*range(0, resolution - native + 1, stride), resolution - native})
    return [(x, y) for y in starts for x in starts]


def generate(backend, concept_or_class: ConceptHandle | str, prompt: str | None = None,
             resolution: int = 512, n: int = 8, tileable: bool = True,
             seed: int = 0) -> list[TextureCandidate]:
    """Generate n texture candidates at the requested resolution. Resolutions
    above the backend's native maximum are assembled from overlapping
    native-resolution generations via weighted blending."""
    if not (MIN_RESOLUTION <= resolution <= MAX_RESOLUTION) or resolution % 64:
        raise InvalidInputError(
            f"resolution must be in [{MIN_RESOLUTION}, {MAX_RESOLUTION}] and a multiple of 64")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    token = concept_or_class.concept_id if isinstance(concept_or_class, ConceptHandle) \
        else concept_or_class
    if prompt is None:
        prompt = prompts.generation_prompt(
            token if isinstance(concept_or_class, str) else "S*")

    native = backend.native_max
    candidates = []
    for i in range(n):
        cand_seed = seed + i
        if resolution <= native:
            img = backend.generate_images(token, prompt, resolution, 1, tileable,
                                          cand_seed)[0]
            patches_used = 1
        else:
            layout = _patch_layout(resolution, native)
            patches = []
            for j, (x, y) in enumerate(layout):
                patch = backend.generate_images(token, prompt, native, 1, False,
                                                cand_seed + 1000 * (j + 1))[0]
                patches.append((patch, x, y))
            img = blend_patches(patches, (resolution, resolution))
            if tileable:
                rng = np.random.default_rng(cand_seed)
                img = roll(img, int(rng.integers(resolution)), int(rng.integers(resolution)))
                img = poisson_blend(img)
            patches_used = len(layout)
        candidates.append(TextureCandidate(
            image=img.astype(np.float32), concept=concept_or_class, prompt=prompt,
            seed=cand_seed, tileable=tileable, seam=seam_score(img),
            patches_used=patches_used,
        ))
    return candidates


def select_best(
    candidates: Sequence[TextureCandidate],
    region_crops: Sequence[np.ndarray],
    metric: Callable[[np.ndarray, np.ndarray], float] = perceptual_distance,
) -> tuple[int, float]:
    """Index of the candidate minimizing the mean perceptual distance to the
    region crops; ties break toward the lowest index."""
    if not candidates or not region_crops:
        raise InvalidInputError("candidates and region_crops must be nonempty")
    crop_side = region_crops[0].shape[0]
    best_idx, best_score = 0, np.inf
    for idx, cand in enumerate(candidates):
        img = cand.image
        side = min(img.shape[0], img.shape[1])
        y0 = (img.shape[0] - side) // 2
        x0 = (img.shape[1] - side) // 2
        img = cv2.resize(img[y0:y0 + side, x0:x0 + side], (crop_side, crop_side),
                         interpolation=cv2.INTER_AREA)
        score = float(np.mean([metric(img, np.asarray(c, np.float32))
                               for c in region_crops]))
        if score < best_score:
            best_idx, best_score = idx, score
    return best_idx, best_score
