"""Seeded parametric artifact models and the paired-corpus builder.

All operators work on float rasters in display scale [0, 1], shape HxWx3,
and use edge-replicate padding wherever pixels are displaced.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, ParameterError, ValidationError
from .imaging import (
    DatasetManifest,
    FrameRecord,
    Quality,
    from_unit,
    load_image,
    save_image,
    save_manifest,
    to_unit,
)


class ArtifactKind(str, enum.Enum):
    GHOST_COLOR = "GhostColor"
    INTERLACING = "Interlacing"
    MOTION_BLUR = "MotionBlur"
    LOW_ILLUMINATION = "LowIllumination"
    OCCLUSION_BLOBS = "OcclusionBlobs"


DEFAULT_PARAMS: dict[ArtifactKind, dict] = {
    ArtifactKind.GHOST_COLOR: {"dx_r": 0, "dy_r": 0, "dx_b": 0, "dy_b": 0},
    ArtifactKind.INTERLACING: {"d": 0},
    ArtifactKind.MOTION_BLUR: {"length": 1, "angle": 0.0},
    ArtifactKind.LOW_ILLUMINATION: {"gain": 1.0, "gamma": 1.0},
    ArtifactKind.OCCLUSION_BLOBS: {"count": 0},
}

MAX_SHIFT = 8
MAX_BLUR_LENGTH = 31
MAX_BLOBS = 10


def _int_param(params: dict, name: str) -> int:
    value = params[name]
    if isinstance(value, bool) or not float(value).is_integer():
        raise ParameterError(name, f"must be an integer, got {value!r}")
    return int(value)


def _check_shift(params: dict, name: str) -> None:
    if abs(_int_param(params, name)) > MAX_SHIFT:
        raise ParameterError(name, f"|{name}| must be <= {MAX_SHIFT}, got {params[name]}")


@dataclass(frozen=True)
class DegradationSpec:
    kind: ArtifactKind
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        try:
            kind = ArtifactKind(self.kind)
        except ValueError:
            raise ParameterError("kind", f"unknown artifact kind {self.kind!r}") from None
        unknown = set(self.params) - set(DEFAULT_PARAMS[kind])
        if unknown:
            raise ParameterError(sorted(unknown)[0], f"not a parameter of {kind.value}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", {**DEFAULT_PARAMS[kind], **self.params})
        self.validate()

    def validate(self) -> None:
        p = self.params
        if self.kind is ArtifactKind.GHOST_COLOR:
            for name in ("dx_r", "dy_r", "dx_b", "dy_b"):
                _check_shift(p, name)
        elif self.kind is ArtifactKind.INTERLACING:
            _check_shift(p, "d")
        elif self.kind is ArtifactKind.MOTION_BLUR:
            length = _int_param(p, "length")
            if not (1 <= length <= MAX_BLUR_LENGTH) or length % 2 == 0:
                raise ParameterError("length", f"must be odd in [1, {MAX_BLUR_LENGTH}], got {length}")
            angle = float(p["angle"])
            if not (0.0 <= angle < math.pi):
                raise ParameterError("angle", f"must lie in [0, pi), got {angle}")
        elif self.kind is ArtifactKind.LOW_ILLUMINATION:
            gain, gamma = float(p["gain"]), float(p["gamma"])
            if not (0.0 < gain <= 1.0):
                raise ParameterError("gain", f"must lie in (0, 1], got {gain}")
            if not (1.0 <= gamma <= 3.0):
                raise ParameterError("gamma", f"must lie in [1, 3], got {gamma}")
        elif self.kind is ArtifactKind.OCCLUSION_BLOBS:
            count = _int_param(p, "count")
            if not (0 <= count <= MAX_BLOBS):
                raise ParameterError("count", f"must lie in [0, {MAX_BLOBS}], got {count}")

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params), "seed": int(self.seed)}

    @classmethod
    def from_json(cls, data: dict) -> "DegradationSpec":
        return cls(data["kind"], dict(data.get("params", {})), int(data.get("seed", 0)))


def _shift(channel: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate content by (dy, dx); vacated pixels replicate the edge."""
    h, w = channel.shape
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    return channel[rows[:, None], cols[None, :]]


def ghost_color(img: np.ndarray, dx_r=0, dy_r=0, dx_b=0, dy_b=0) -> np.ndarray:
    out = img.copy()
    out[..., 0] = _shift(img[..., 0], dy_r, dx_r)
    out[..., 2] = _shift(img[..., 2], dy_b, dx_b)
    return out


def interlace(img: np.ndarray, d=0) -> np.ndarray:
    out = img.copy()
    w = img.shape[1]
    cols = np.clip(np.arange(w) - d, 0, w - 1)
    out[1::2] = img[1::2][:, cols]
    return out


def line_kernel_taps(length: int, angle: float) -> list[tuple[int, int, float]]:
    """Taps ``(dy, dx, weight)`` of a normalized line kernel through the origin.

    Each of the ``length`` samples along the line snaps to its nearest pixel
    and carries weight ``1/length``; coincident samples merge.
    """
    half = (length - 1) / 2
    counts: dict[tuple[int, int], int] = {}
    for t in np.linspace(-half, half, length):
        dx = int(round(t * math.cos(angle)))
        dy = int(round(-t * math.sin(angle)))
        counts[(dy, dx)] = counts.get((dy, dx), 0) + 1
    return [(dy, dx, n / length) for (dy, dx), n in sorted(counts.items())]


def motion_blur(img: np.ndarray, length=1, angle=0.0) -> np.ndarray:
    taps = line_kernel_taps(int(length), float(angle))
    r = (int(length) - 1) // 2
    h, w = img.shape[:2]
    padded = np.pad(img, ((r, r), (r, r), (0, 0)), mode="edge")
    # Accumulate deviations from the centre pixel so that flat regions are
    # reproduced bit-exactly despite floating-point tap weights.
    acc = np.zeros_like(img)
    for dy, dx, wgt in taps:
        shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        acc += wgt * (shifted - img)
    return img + acc


def low_illumination(img: np.ndarray, gain=1.0, gamma=1.0) -> np.ndarray:
    return np.clip(gain * np.power(img, gamma), 0.0, 1.0)


def occlusion_blobs(img: np.ndarray, count=0, seed=0) -> np.ndarray:
    """Alpha-composite ``count`` soft, brown-tinted ellipses over the frame."""
    if count == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = img.copy()
    scale = min(h, w)
    for _ in range(int(count)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ay, ax = rng.uniform(0.04, 0.15, size=2) * scale
        theta = rng.uniform(0, math.pi)
        color = np.array([0.42, 0.28, 0.10]) + rng.uniform(-0.06, 0.06, size=3)
        opacity = rng.uniform(0.6, 0.95)
        softness = rng.uniform(0.15, 0.4)
        c, s = math.cos(theta), math.sin(theta)
        u = ((xx - cx) * c + (yy - cy) * s) / max(ax, 0.5)
        v = (-(xx - cx) * s + (yy - cy) * c) / max(ay, 0.5)
        radius = np.sqrt(u * u + v * v)
        alpha = opacity * np.clip((1.0 - radius) / softness, 0.0, 1.0)
        out = (1.0 - alpha[..., None]) * out + alpha[..., None] * np.clip(color, 0, 1)
    return out


def _check_display(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"expected an HxWx3 raster, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("raster contains non-finite values")
    return arr


def apply_artifact(img: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    arr = _check_display(img)
    p = spec.params
    if spec.kind is ArtifactKind.GHOST_COLOR:
        return ghost_color(arr, int(p["dx_r"]), int(p["dy_r"]), int(p["dx_b"]), int(p["dy_b"]))
    if spec.kind is ArtifactKind.INTERLACING:
        return interlace(arr, int(p["d"]))
    if spec.kind is ArtifactKind.MOTION_BLUR:
        return motion_blur(arr, int(p["length"]), float(p["angle"]))
    if spec.kind is ArtifactKind.LOW_ILLUMINATION:
        return low_illumination(arr, float(p["gain"]), float(p["gamma"]))
    return occlusion_blobs(arr, int(p["count"]), spec.seed)


def compose(img: np.ndarray, specs: Sequence[DegradationSpec]) -> np.ndarray:
    out = _check_display(img)
    for spec in specs:
        out = apply_artifact(out, spec)
    return out


# ---------------------------------------------------------------------------
# sampling specs


@dataclass(frozen=True)
class SpecSampler:
    """Seeded distribution over artifact lists.

    Draws between ``min_artifacts`` and ``max_artifacts`` distinct kinds
    uniformly without replacement from ``kinds``. Kinds listed in
    ``required`` are always included (and count towards the total).
    Parameter ranges are closed intervals.
    """

    kinds: tuple[str, ...] = tuple(k.value for k in ArtifactKind)
    min_artifacts: int = 1
    max_artifacts: int = 3
    required: tuple[str, ...] = ()
    max_shift: int = 4
    blur_lengths: tuple[int, int] = (3, 9)
    gain_range: tuple[float, float] = (0.35, 0.7)
    gamma_range: tuple[float, float] = (1.0, 1.8)
    blob_count: tuple[int, int] = (1, 3)

    def __post_init__(self):
        for name in ("kinds", "required", "blur_lengths", "gain_range", "gamma_range", "blob_count"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for k in self.kinds + self.required:
            ArtifactKind(k)
        if not (0 <= self.min_artifacts <= self.max_artifacts):
            raise ParameterError("min_artifacts", "must satisfy 0 <= min <= max")
        if self.max_artifacts > len(set(self.kinds) | set(self.required)):
            raise ParameterError("max_artifacts", "exceeds the number of available kinds")

    def _params(self, kind: ArtifactKind, rng: np.random.Generator) -> dict:
        m = self.max_shift
        if kind is ArtifactKind.GHOST_COLOR:
            return {k: int(rng.integers(-m, m + 1)) for k in ("dx_r", "dy_r", "dx_b", "dy_b")}
        if kind is ArtifactKind.INTERLACING:
            return {"d": int(rng.choice([-1, 1]) * rng.integers(1, m + 1))}
        if kind is ArtifactKind.MOTION_BLUR:
            lo, hi = self.blur_lengths
            odd = [n for n in range(lo, hi + 1) if n % 2 == 1]
            return {"length": int(rng.choice(odd)), "angle": float(rng.uniform(0, math.pi))}
        if kind is ArtifactKind.LOW_ILLUMINATION:
            return {
                "gain": float(rng.uniform(*self.gain_range)),
                "gamma": float(rng.uniform(*self.gamma_range)),
            }
        return {"count": int(rng.integers(self.blob_count[0], self.blob_count[1] + 1))}

    def sample(self, rng: np.random.Generator) -> list[DegradationSpec]:
        n = int(rng.integers(self.min_artifacts, self.max_artifacts + 1))
        chosen = list(dict.fromkeys(self.required))
        pool = [k for k in self.kinds if k not in chosen]
        extra = max(0, n - len(chosen))
        if extra:
            picks = rng.choice(len(pool), size=min(extra, len(pool)), replace=False)
            chosen += [pool[i] for i in sorted(picks)]
        specs = []
        for name in chosen:
            kind = ArtifactKind(name)
            specs.append(DegradationSpec(kind, self._params(kind, rng), int(rng.integers(2**31))))
        # apply in a fixed canonical order: optics first, sensor timing last
        order = [k.value for k in (ArtifactKind.OCCLUSION_BLOBS, ArtifactKind.LOW_ILLUMINATION,
                                   ArtifactKind.MOTION_BLUR, ArtifactKind.GHOST_COLOR,
                                   ArtifactKind.INTERLACING)]
        return sorted(specs, key=lambda s: order.index(s.kind.value))

    def to_json(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "min_artifacts": self.min_artifacts,
            "max_artifacts": self.max_artifacts,
            "required": list(self.required),
            "max_shift": self.max_shift,
            "blur_lengths": list(self.blur_lengths),
            "gain_range": list(self.gain_range),
            "gamma_range": list(self.gamma_range),
            "blob_count": list(self.blob_count),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SpecSampler":
        return cls(**data)


def identity_sampler(rng: np.random.Generator) -> list[DegradationSpec]:
    return []


def frame_seed(global_seed: int, frame_id: str) -> int:
    digest = hashlib.sha256(f"{int(global_seed)}:{frame_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class PairedCorpus:
    clean: DatasetManifest
    degraded: DatasetManifest
    pairs: list[tuple[str, str]]
    specs: dict[str, list[DegradationSpec]]


def degrade_frame(
    img_u8: np.ndarray, sampler: Callable, seed: int
) -> tuple[np.ndarray, list[DegradationSpec]]:
    specs = sampler.sample if hasattr(sampler, "sample") else sampler
    specs = specs(np.random.default_rng(seed))
    return from_unit(compose(to_unit(img_u8), specs)), specs


def build_paired_corpus(
    manifest: DatasetManifest,
    sampler: SpecSampler | Callable = SpecSampler(),
    out_dir: str | Path = "corpus",
    seed: int = 0,
    suffix: str = "_deg",
    config_hash: str | None = None,
) -> PairedCorpus:
    """Give every clean frame one degraded twin written under ``out_dir``.

    Writes ``degraded/*.png``, ``clean.json``, ``degraded.json``,
    ``pairs.csv`` and ``specs.json`` (per-frame artifact provenance).
    """
    out_dir = Path(out_dir)
    try:
        (out_dir / "degraded").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}") from exc

    degraded_records, pairs, provenance = [], [], {}
    for rec in manifest.records:
        img = load_image(rec.path)
        out, specs = degrade_frame(img, sampler, frame_seed(seed, rec.frame_id))
        deg_id = f"{rec.frame_id}{suffix}"
        path = out_dir / "degraded" / f"{deg_id}.png"
        save_image(path, out)
        degraded_records.append(
            FrameRecord(deg_id, rec.patient_id, Quality.UNINFORMATIVE, str(path.resolve()), rec.gt_boxes)
        )
        pairs.append((rec.frame_id, deg_id))
        provenance[deg_id] = specs

    degraded = DatasetManifest(
        tuple(degraded_records), f"{manifest.name}{suffix}", f"degradation seed {seed}", config_hash
    )
    save_manifest(manifest, out_dir / "clean.json")
    save_manifest(degraded, out_dir / "degraded.json")
    write_pairs(out_dir / "pairs.csv", pairs)
    try:
        (out_dir / "specs.json").write_text(
            json.dumps({k: [s.to_json() for s in v] for k, v in provenance.items()}, indent=2)
        )
    except OSError as exc:
        raise DataError(f"cannot write {out_dir / 'specs.json'}: {exc}") from exc
    return PairedCorpus(manifest, degraded, pairs, provenance)


def write_pairs(path: str | Path, pairs: Sequence[tuple[str, str]]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["clean_id", "degraded_id"])
            writer.writerows(pairs)
    except OSError as exc:
        raise DataError(f"cannot write pairing table {path}: {exc}") from exc


def read_pairs(path: str | Path) -> list[tuple[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            return [(row["clean_id"], row["degraded_id"]) for row in reader]
    except (OSError, KeyError) as exc:
        raise DataError(f"cannot read pairing table {path}: {exc}") from exc
