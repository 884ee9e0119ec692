"""Dataset machinery: library ingestion, prompt-generation plans, the
synthetic ground-truth generator, and class-ontology mapping."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from . import prompts
from .errors import EmptyLibraryError, InvalidInputError
from .materials import MaterialMaps, load_image, load_material, save_material
from .patterns import PATTERN_KINDS, PatternParams, material_from_params, rotate_hue


def _data_text(name: str) -> str:
    return resources.files("matpal.data").joinpath(name).read_text()


def default_class_list() -> list[str]:
    """The shipped 130-entry material class ontology."""
    return [line for line in _data_text("classes_130.txt").splitlines() if line]


def common_classes() -> list[str]:
    """The 14-class common set used by the resemblance protocol."""
    return [line for line in _data_text("common_classes_14.txt").splitlines() if line]


@dataclasses.dataclass(frozen=True)
class ClassMapping:
    """Total mapping of dataset classes onto a common class set."""

    pairs: dict[str, str]

    @classmethod
    def shipped(cls) -> "ClassMapping":
        return cls(json.loads(_data_text("class_mapping_14.json")))

    def apply(self, label: str) -> str:
        if label in self.pairs.values():
            return label  # already a common class: idempotent
        if label not in self.pairs:
            raise InvalidInputError(f"class {label!r} is not in the mapping")
        return self.pairs[label]


@dataclasses.dataclass
class SampleRecord:
    id: str
    class_label: str
    domain: str = "source"          # source | target
    split: str = "train"            # train | val | test
    material: MaterialMaps | None = None
    texture: np.ndarray | None = None
    pseudo: MaterialMaps | None = None
    paths: dict[str, str] = dataclasses.field(default_factory=dict)
    pseudo_model_digest: str | None = None

    def load_material(self) -> MaterialMaps:
        if self.material is not None:
            return self.material
        if "material_dir" in self.paths:
            return load_material(self.paths["material_dir"])
        if {"albedo", "normal", "roughness"} <= set(self.paths):
            from .materials import GAMMA, decode_normals, _read_png

            albedo = np.power(load_image(self.paths["albedo"]), GAMMA)
            normals = decode_normals(load_image(self.paths["normal"]))
            rough = _read_png(Path(self.paths["roughness"]))
            if rough.ndim == 3:
                rough = rough[..., 0]
            return MaterialMaps(
                albedo.astype(np.float32), normals, rough[..., None].astype(np.float32))
        raise InvalidInputError(f"sample {self.id} has no ground-truth maps")

    def load_texture(self) -> np.ndarray:
        if self.texture is not None:
            return self.texture
        if "texture" in self.paths:
            return load_image(self.paths["texture"])
        raise InvalidInputError(f"sample {self.id} has no texture")


def _quantize_digest(h: "hashlib._Hash", arr: np.ndarray) -> None:
    q = np.round(np.asarray(arr, dtype=np.float64) * 65535.0).astype(np.uint16)
    h.update(q.tobytes())


@dataclasses.dataclass
class DatasetManifest:
    samples: list[SampleRecord]
    ontology: list[str]
    skipped: list[str] = dataclasses.field(default_factory=list)

    def __post_init__(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("sample ids must be unique")
        for s in self.samples:
            if s.class_label not in self.ontology:
                raise InvalidInputError(
                    f"sample {s.id} label {s.class_label!r} not in ontology")

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        for s in sorted(self.samples, key=lambda s: s.id):
            h.update(s.id.encode())
            h.update(s.class_label.encode())
            h.update(s.domain.encode())
            h.update(s.split.encode())
            if s.material is not None:
                _quantize_digest(h, s.material.albedo)
                _quantize_digest(h, (s.material.normals + 1) * 0.5)
                _quantize_digest(h, s.material.roughness)
            if s.texture is not None:
                _quantize_digest(h, s.texture)
            for key in sorted(s.paths):
                h.update(f"{key}={s.paths[key]}".encode())
        return h.hexdigest()

    def subset(self, **filters) -> list[SampleRecord]:
        out = self.samples
        for key, val in filters.items():
            out = [s for s in out if getattr(s, key) == val]
        return out

    def to_json(self, path: str | Path) -> None:
        rows = []
        for s in self.samples:
            rows.append({
                "id": s.id, "class_label": s.class_label, "domain": s.domain,
                "split": s.split, "paths": s.paths,
                "pseudo_model_digest": s.pseudo_model_digest,
            })
        Path(path).write_text(json.dumps(
            {"samples": rows, "ontology": self.ontology, "skipped": self.skipped},
            indent=1,
        ))

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetManifest":
        raw = json.loads(Path(path).read_text())
        samples = [SampleRecord(
            id=r["id"], class_label=r["class_label"], domain=r["domain"],
            split=r["split"], paths=r.get("paths", {}),
            pseudo_model_digest=r.get("pseudo_model_digest"),
        ) for r in raw["samples"]]
        return cls(samples, raw["ontology"], raw.get("skipped", []))


# --- library ingestion --------------------------------------------------

_MAP_PATTERNS = {
    "albedo": re.compile(r"(?:^|_)(color|albedo)\.", re.IGNORECASE),
    "normal": re.compile(r"(?:^|_)normal", re.IGNORECASE),
    "roughness": re.compile(r"(?:^|_)roughness\.", re.IGNORECASE),
}


def ingest_library(root_dir: str | Path) -> DatasetManifest:
    """Index a directory of per-material folders holding albedo/normal/
    roughness files. Incomplete folders are skipped and reported; the class
    label is the leading alphabetic token of the folder name."""
    root = Path(root_dir)
    samples, skipped, ontology = [], [], set()
    for folder in sorted(p for p in root.iterdir() if p.is_dir()):
        found: dict[str, Path] = {}
        for f in sorted(folder.iterdir()):
            for key, pat in _MAP_PATTERNS.items():
                if key not in found and pat.search(f.name):
                    found[key] = f
        if set(found) != set(_MAP_PATTERNS):
            missing = sorted(set(_MAP_PATTERNS) - set(found))
            skipped.append(f"{folder.name}: missing {', '.join(missing)}")
            continue
        label_match = re.match(r"[A-Za-z]+", folder.name)
        label = (label_match.group(0) if label_match else folder.name).lower()
        ontology.add(label)
        samples.append(SampleRecord(
            id=folder.name, class_label=label,
            paths={
                "albedo": str(found["albedo"]),
                "normal": str(found["normal"]),
                "roughness": str(found["roughness"]),
            },
        ))
    if not samples:
        raise EmptyLibraryError(f"no complete materials under {root}")
    return DatasetManifest(samples, sorted(ontology), skipped)


# --- prompt-generation plans --------------------------------------------

def texsd_manifest(
    classes: list[str],
    templates: tuple[str, ...] = prompts.GEN_TEMPLATES,
    per_class: int = 1,
    seed: int = 0,
    resolution: int = 1024,
) -> list[dict]:
    """Deterministic plan of (class token, prompt, seed, resolution) rows,
    one row per class x per_class, prompts cycling through the templates."""
    if not classes:
        raise InvalidInputError("classes must be nonempty")
    if per_class < 1:
        raise InvalidInputError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    plan = []
    for cls_name in classes:
        for i in range(per_class):
            template = templates[i % len(templates)] if per_class > 1 \
                else prompts.DEFAULT_GEN_TEMPLATE
            plan.append({
                "class_token": cls_name,
                "prompt": prompts.generation_prompt(cls_name, template),
                "seed": int(rng.integers(0, 2 ** 31)),
                "resolution": resolution,
            })
    return plan


def plan_digest(plan: list[dict]) -> str:
    return hashlib.sha256(
        "\n".join(json.dumps(row, sort_keys=True) for row in plan).encode()
    ).hexdigest()


def save_plan(plan: list[dict], path: str | Path) -> None:
    Path(path).write_text("\n".join(json.dumps(r, sort_keys=True) for r in plan) + "\n")


# --- synthetic ground truth ---------------------------------------------

_CLASS_COLORS = {
    "stripes": ((0.75, 0.25, 0.2), (0.9, 0.8, 0.6)),
    "bricks": ((0.2, 0.3, 0.6), (0.8, 0.8, 0.85)),
    "dots": ((0.2, 0.55, 0.25), (0.95, 0.9, 0.3)),
    "noise": ((0.45, 0.3, 0.55), (0.75, 0.7, 0.65)),
}

HUE_SHIFT_DEGREES = 60.0
FREQUENCY_SHIFT = 2


def synthetic_params(
    index: int, ontology: list[str], domain_shift: str, rng: np.random.Generator
) -> tuple[str, PatternParams]:
    kind = ontology[index % len(ontology)]
    base, accent = _CLASS_COLORS.get(kind, _CLASS_COLORS["noise"])
    jitter = rng.uniform(-0.08, 0.08, 3)
    base = tuple(np.clip(np.asarray(base) + jitter, 0, 1).tolist())
    cycles = int(rng.integers(3, 6))
    if domain_shift == "shifted":
        base = rotate_hue(base, HUE_SHIFT_DEGREES)
        accent = rotate_hue(accent, HUE_SHIFT_DEGREES)
        cycles += FREQUENCY_SHIFT
    params = PatternParams(
        kind=kind, base_color=base, accent_color=accent, cycles=cycles,
        orientation_k=int(rng.integers(0, 2)), seed=int(rng.integers(0, 2 ** 31)),
    )
    return kind, params


def gen_synthetic(
    n: int,
    ontology: list[str] = PATTERN_KINDS,
    domain_shift: str = "none",
    seed: int = 0,
    size: int = 64,
    out_dir: str | Path | None = None,
) -> DatasetManifest:
    """Procedurally build n materials with exact ground truth. ``shifted``
    applies a hue rotation plus a pattern-frequency shift, defining the
    synthetic target distribution."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if domain_shift not in ("none", "shifted"):
        raise InvalidInputError("domain_shift must be 'none' or 'shifted'")
    ontology = list(ontology)
    rng = np.random.default_rng(seed)
    domain = "source" if domain_shift == "none" else "target"
    samples = []
    for i in range(n):
        kind, params = synthetic_params(i, ontology, domain_shift, rng)
        material = material_from_params(params, size)
        rec = SampleRecord(
            id=f"{domain}-{seed}-{i:04d}", class_label=kind,
            domain=domain, material=material,
        )
        if out_dir is not None:
            d = Path(out_dir) / rec.id
            save_material(d, material)
            rec.paths["material_dir"] = str(d)
        samples.append(rec)
    manifest = DatasetManifest(samples, ontology)
    if out_dir is not None:
        manifest.to_json(Path(out_dir) / "manifest.json")
    return manifest
