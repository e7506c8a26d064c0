"""Image rasters, boxes, dataset manifests and patient-wise splitting."""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import DataError, ValidationError

DEFAULT_SPLIT_RATIOS = (0.7, 0.1, 0.2)
SPLIT_NAMES = ("train", "val", "test")


# ---------------------------------------------------------------------------
# rasters


def _check_raster(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"expected an HxWx3 raster, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"empty raster of shape {arr.shape}")
    return arr


def normalize(img: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Map an 8-bit style raster in [0, 255] to the working range [-1, 1]."""
    arr = _check_raster(img)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)):
            raise ValidationError("raster contains non-finite values")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValidationError(
            f"raster values must lie in [0, 255], got [{arr.min()}, {arr.max()}]"
        )
    out = arr.astype(dtype)
    return 2.0 * (out / 255.0) - 1.0


def denormalize(img: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`; clips overshoot, rounds half up, returns uint8."""
    arr = np.clip(np.asarray(img, dtype=np.float64), -1.0, 1.0)
    return np.floor(255.0 * (arr + 1.0) / 2.0 + 0.5).astype(np.uint8)


def to_unit(img: np.ndarray) -> np.ndarray:
    """uint8 raster -> float64 display scale [0, 1]."""
    return np.asarray(img, dtype=np.float64) / 255.0


def from_unit(img: np.ndarray) -> np.ndarray:
    """Display scale [0, 1] -> uint8, clipping and rounding half up."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def psnr(reference: np.ndarray, test: np.ndarray, data_range: float = 255.0) -> float:
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ValidationError(f"shape mismatch {ref.shape} vs {tst.shape}")
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def load_image(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def save_image(path: str | Path, img: np.ndarray) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValidationError(f"expected uint8 raster for {path}, got {arr.dtype}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise DataError(f"cannot write image {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# boxes and detections


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in absolute pixel corner coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def is_degenerate(self) -> bool:
        return not (self.x_min < self.x_max and self.y_min < self.y_max)

    @property
    def area(self) -> float:
        return max(0.0, self.x_max - self.x_min) * max(0.0, self.y_max - self.y_min)

    def clip(self, width: float, height: float) -> "BoundingBox":
        return BoundingBox(
            min(max(self.x_min, 0.0), width),
            min(max(self.y_min, 0.0), height),
            min(max(self.x_max, 0.0), width),
            min(max(self.y_max, 0.0), height),
        )

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and self.x_max >= other.x_max
            and self.y_max >= other.y_max
        )

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_center(
        cls, cx: float, cy: float, w: float, h: float, width: float, height: float
    ) -> "BoundingBox":
        """Convert a normalized center/size box (YOLO label style) to pixel corners."""
        return cls(
            (cx - w / 2) * width,
            (cy - h / 2) * height,
            (cx + w / 2) * width,
            (cy + h / 2) * height,
        ).clip(width, height)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float
    class_id: int = 0

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


# ---------------------------------------------------------------------------
# manifests


class Quality(str, enum.Enum):
    INFORMATIVE = "informative"
    UNINFORMATIVE = "uninformative"


def _coerce_quality(value):
    if isinstance(value, Quality):
        return value
    try:
        return Quality(value)
    except ValueError:
        # kept raw so validate_manifest can report it
        return value


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    patient_id: str
    quality: Quality
    path: str
    gt_boxes: tuple[BoundingBox, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "quality", _coerce_quality(self.quality))
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))

    def to_json(self, relative_to: Path | None = None) -> dict:
        path = Path(self.path)
        if relative_to is not None and path.is_absolute():
            try:
                path = path.relative_to(relative_to)
            except ValueError:
                pass
        quality = self.quality.value if isinstance(self.quality, Quality) else self.quality
        return {
            "frame_id": self.frame_id,
            "patient_id": self.patient_id,
            "quality": quality,
            "path": path.as_posix(),
            "gt_boxes": [b.as_list() for b in self.gt_boxes],
        }


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[FrameRecord, ...]
    name: str = "manifest"
    seed_note: str | None = None
    config_hash: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def frame_ids(self) -> list[str]:
        return [r.frame_id for r in self.records]

    @property
    def patient_ids(self) -> list[str]:
        return sorted({r.patient_id for r in self.records})

    def by_id(self) -> dict[str, FrameRecord]:
        return {r.frame_id: r for r in self.records}

    def filter(self, keep) -> "DatasetManifest":
        return replace(self, records=tuple(r for r in self.records if keep(r)))

    def with_records(self, records: Iterable[FrameRecord], name: str | None = None):
        return replace(self, records=tuple(records), name=name or self.name)


def manifest_to_json(manifest: DatasetManifest, relative_to: Path | None = None) -> dict:
    out = {
        "name": manifest.name,
        "records": [r.to_json(relative_to) for r in manifest.records],
    }
    if manifest.seed_note is not None:
        out["seed_note"] = manifest.seed_note
    if manifest.config_hash is not None:
        out["config_hash"] = manifest.config_hash
    return out


def manifest_from_json(data: dict, root: Path | None = None) -> DatasetManifest:
    try:
        records = []
        for rec in data["records"]:
            path = Path(rec["path"])
            if root is not None and not path.is_absolute():
                path = root / path
            records.append(
                FrameRecord(
                    frame_id=str(rec["frame_id"]),
                    patient_id=str(rec["patient_id"]),
                    quality=rec["quality"],
                    path=str(path),
                    gt_boxes=tuple(BoundingBox(*map(float, b)) for b in rec.get("gt_boxes", [])),
                )
            )
        return DatasetManifest(
            records=tuple(records),
            name=str(data.get("name", "manifest")),
            seed_note=data.get("seed_note"),
            config_hash=data.get("config_hash"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed manifest: {exc!r}") from exc


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    return manifest_from_json(data, root=path.parent.resolve())


def save_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = manifest_to_json(manifest, relative_to=path.parent.resolve())
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


@dataclass(frozen=True)
class Violation:
    kind: str  # duplicate_id | missing_path | degenerate_box | invalid_quality
    frame_id: str
    detail: str = ""


def validate_manifest(manifest: DatasetManifest, check_paths: bool = True) -> list[Violation]:
    violations: list[Violation] = []
    counts = Counter(r.frame_id for r in manifest.records)
    for frame_id, n in counts.items():
        if n > 1:
            violations.append(Violation("duplicate_id", frame_id, f"{n} records"))
    for rec in manifest.records:
        if not isinstance(rec.quality, Quality):
            violations.append(Violation("invalid_quality", rec.frame_id, repr(rec.quality)))
        if check_paths and not Path(rec.path).is_file():
            violations.append(Violation("missing_path", rec.frame_id, rec.path))
        for i, box in enumerate(rec.gt_boxes):
            coords = box.as_list()
            if not all(math.isfinite(c) for c in coords) or box.is_degenerate:
                violations.append(Violation("degenerate_box", rec.frame_id, f"box {i}: {coords}"))
    return violations


# ---------------------------------------------------------------------------
# splitting


def patient_wise_split(
    manifest: DatasetManifest,
    ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Split by patient so no patient appears in two splits.

    Patients are sorted, shuffled with ``seed``, then poured into train, val
    and test in that order; a split closes once the cumulative frame count
    reaches its cumulative ratio. The last split takes whatever remains.
    """
    if len(manifest) == 0:
        raise DataError("cannot split an empty manifest")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 or not math.isfinite(r) for r in ratios):
        raise DataError(f"ratios must be three nonnegative reals, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {sum(ratios)!r}")

    frames_per_patient = Counter(r.patient_id for r in manifest.records)
    patients = sorted(frames_per_patient)
    order = np.random.default_rng(seed).permutation(len(patients))

    total = len(manifest)
    bounds = np.cumsum(ratios) * total
    tol = 1e-9 * total
    assignment: dict[str, int] = {}
    split, filled = 0, 0
    for idx in order:
        pid = patients[idx]
        while split < 2 and filled >= bounds[split] - tol:
            split += 1
        assignment[pid] = split
        filled += frames_per_patient[pid]

    parts = []
    for k, suffix in enumerate(SPLIT_NAMES):
        recs = [r for r in manifest.records if assignment[r.patient_id] == k]
        parts.append(replace(manifest, records=tuple(recs), name=f"{manifest.name}_{suffix}"))
    return tuple(parts)
