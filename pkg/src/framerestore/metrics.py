"""Detection evaluation: IoU, greedy matching, P/R/F1, 101-point AP and report tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ValidationError
from .imaging import BoundingBox, Detection

DEFAULT_CONF_THRESH = 0.25
DEFAULT_IOU_THRESH = 0.5
# 0.50:0.05:0.95, built from integers so each threshold is the nearest double
COCO_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_GRID = np.arange(101) / 100

METRICS = ("precision", "recall", "f1", "map50", "map5095")
METRIC_LABELS = {
    "precision": "Precision (%)",
    "recall": "Recall (%)",
    "f1": "F1-score (%)",
    "map50": "mAP@0.5 (%)",
    "map5095": "mAP@0.5:0.95 (%)",
}

# (detections, ground truths) for one image
ImageEval = tuple[Sequence[Detection], Sequence[BoundingBox]]


def iou(b1: BoundingBox, b2: BoundingBox) -> float:
    if b1.is_degenerate or b2.is_degenerate:
        raise ValidationError(f"degenerate box in IoU: {b1} / {b2}")
    iw = min(b1.x_max, b2.x_max) - max(b1.x_min, b2.x_min)
    ih = min(b1.y_max, b2.y_max) - max(b1.y_min, b2.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (b1.area + b2.area - inter)


@dataclass
class MatchResult:
    tp: list[bool]  # per detection, input order
    matched_gt: list[int | None]
    confidences: list[float]
    n_gt: int

    @property
    def n_tp(self) -> int:
        return sum(self.tp)

    @property
    def n_fp(self) -> int:
        return len(self.tp) - self.n_tp

    @property
    def n_fn(self) -> int:
        return self.n_gt - self.n_tp


def confidence_order(confidences: Sequence[float]) -> list[int]:
    # sorted() is stable, so equal confidences keep input order
    return sorted(range(len(confidences)), key=lambda i: -confidences[i])


def match_detections(
    dets: Sequence[Detection], gts: Sequence[BoundingBox], iou_thresh: float = DEFAULT_IOU_THRESH
) -> MatchResult:
    """Greedy one-to-one matching in descending confidence order.

    Each detection claims the still-unmatched ground truth it overlaps most,
    provided that overlap reaches ``iou_thresh``; otherwise it is a false
    positive.
    """
    if not 0.0 < iou_thresh <= 1.0:
        raise ValueError(f"iou_thresh must lie in (0, 1], got {iou_thresh}")
    confs = [d.confidence for d in dets]
    tp = [False] * len(dets)
    matched: list[int | None] = [None] * len(dets)
    taken = [False] * len(gts)
    for i in confidence_order(confs):
        best, best_iou = None, -1.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            overlap = iou(dets[i].box, gt)
            if overlap > best_iou:
                best, best_iou = j, overlap
        if best is not None and best_iou >= iou_thresh:
            taken[best] = True
            tp[i] = True
            matched[i] = best
    return MatchResult(tp, matched, confs, len(gts))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def precision_recall_f1(
    images: Iterable[ImageEval],
    conf_thresh: float = DEFAULT_CONF_THRESH,
    iou_thresh: float = DEFAULT_IOU_THRESH,
) -> tuple[float, float, float]:
    """Dataset-level P, R, F1 as fractions. Detections below ``conf_thresh`` are dropped first."""
    tp = fp = fn = 0
    for dets, gts in images:
        kept = [d for d in dets if d.confidence >= conf_thresh]
        m = match_detections(kept, gts, iou_thresh)
        tp, fp, fn = tp + m.n_tp, fp + m.n_fp, fn + m.n_fn
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    return p, r, f1_score(p, r)


def ranked_average_precision(tp_ranked: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP of detections already ranked by confidence.

    At each recall level r in {0, 0.01, ..., 1} the interpolated precision is
    the best precision attained at any recall >= r (0 if none).
    """
    if n_gt < 1:
        raise DataError("average precision is undefined without ground truth")
    flags = np.asarray(tp_ranked, dtype=bool)
    if flags.size == 0:
        return 0.0
    tps = np.cumsum(flags)
    recall = tps / n_gt
    precision = tps / np.arange(1, flags.size + 1)
    # suffix maximum: envelope[k] = max(precision[k:])
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    sampled = np.where(idx < flags.size, envelope[np.minimum(idx, flags.size - 1)], 0.0)
    return float(sampled.sum() / RECALL_GRID.size)


def pooled_ranking(images: Sequence[ImageEval], iou_thresh: float) -> tuple[list[bool], int]:
    """Match per image, then merge all detections by confidence (ties: image, then input order)."""
    scored, n_gt = [], 0
    for dets, gts in images:
        m = match_detections(dets, gts, iou_thresh)
        scored.extend(zip(m.confidences, m.tp))
        n_gt += len(gts)
    order = confidence_order([c for c, _ in scored])
    return [scored[i][1] for i in order], n_gt


def average_precision(images: Sequence[ImageEval], iou_thresh: float = DEFAULT_IOU_THRESH) -> float:
    tp_ranked, n_gt = pooled_ranking(images, iou_thresh)
    return ranked_average_precision(tp_ranked, n_gt)


def map_range(
    images: Sequence[ImageEval], thresholds: Sequence[float] = COCO_THRESHOLDS
) -> tuple[float, float]:
    """(AP at 0.5, mean AP over ``thresholds``); single class, so mAP is AP."""
    images = list(images)
    aps = [average_precision(images, t) for t in thresholds]
    return average_precision(images, 0.5), float(np.mean(aps))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float = 0.0
    n: int = 1

    def to_json(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}


@dataclass(frozen=True)
class MetricsReport:
    """Percentages with mean and sample std over ``n`` runs."""

    precision: Stat
    recall: Stat
    f1: Stat
    map50: Stat
    map5095: Stat
    axis: str = "runs"
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in METRICS:
            value = getattr(self, name)
            if not isinstance(value, Stat):
                value = Stat(float(value))
                object.__setattr__(self, name, value)
            if not (0.0 <= value.mean <= 100.0):
                raise ValidationError(f"{name} mean {value.mean} outside [0, 100]")

    @classmethod
    def point(cls, precision, recall, f1, map50, map5095, **kw) -> "MetricsReport":
        return cls(*(Stat(float(v)) for v in (precision, recall, f1, map50, map5095)), **kw)

    def means(self) -> dict[str, float]:
        return {m: getattr(self, m).mean for m in METRICS}

    def to_json(self) -> dict:
        out = {m: getattr(self, m).to_json() for m in METRICS}
        out["meta"] = {"axis": self.axis, **self.notes}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MetricsReport":
        try:
            stats = [Stat(float(data[m]["mean"]), float(data[m].get("std", 0.0)), int(data[m].get("n", 1)))
                     for m in METRICS]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed metrics report: {exc!r}") from exc
        meta = dict(data.get("meta", {}))
        axis = meta.pop("axis", "runs")
        return cls(*stats, axis=axis, notes=meta)


def evaluate(
    images: Sequence[ImageEval],
    conf_thresh: float = DEFAULT_CONF_THRESH,
    iou_thresh: float = DEFAULT_IOU_THRESH,
    **notes,
) -> MetricsReport:
    images = list(images)
    p, r, f1 = precision_recall_f1(images, conf_thresh, iou_thresh)
    m50, m5095 = map_range(images)
    return MetricsReport.point(100 * p, 100 * r, 100 * f1, 100 * m50, 100 * m5095,
                               notes={"conf_thresh": conf_thresh, "iou_thresh": iou_thresh, **notes})


def aggregate_runs(reports: Sequence[MetricsReport], axis: str = "runs") -> MetricsReport:
    """Per-metric mean and sample standard deviation (n - 1 denominator) of run means."""
    if not reports:
        raise ValueError("aggregate_runs needs at least one report")
    n = len(reports)
    stats = []
    for m in METRICS:
        values = np.array([getattr(r, m).mean for r in reports], dtype=np.float64)
        std = float(np.std(values, ddof=1)) if n > 1 else 0.0
        stats.append(Stat(float(np.mean(values)), std, n))
    return MetricsReport(*stats, axis=axis)


def f1_consistency_gap(precision: float, recall: float, f1_printed: str | float) -> tuple[float, float]:
    """(|recomputed F1 - stored F1|, allowed gap).

    The allowance is 0.01, widened to half a unit in the last printed decimal
    when the stored value was printed more coarsely than that.
    """
    text = str(f1_printed)
    decimals = len(text.split(".")[1]) if "." in text else 0
    gap = abs(f1_score(precision, recall) - float(text))
    return gap, max(0.01, 0.5 * 10.0**-decimals)


@dataclass(frozen=True)
class DeltaRow:
    metric: str
    raw: Stat
    translated: Stat
    delta: float

    @property
    def sign(self) -> str:
        if abs(self.delta) < 5e-13:
            return "="
        return "+" if self.delta > 0 else "-"


def compare_reports(raw: MetricsReport, translated: MetricsReport) -> list[DeltaRow]:
    return [
        DeltaRow(m, getattr(raw, m), getattr(translated, m), getattr(translated, m).mean - getattr(raw, m).mean)
        for m in METRICS
    ]


def _fmt(stat: Stat, decimals: int) -> str:
    return f"{stat.mean:.{decimals}f}±{stat.std:.{decimals}f}"


def render_comparison(rows: Sequence[DeltaRow], decimals: int = 2, header: str | None = None) -> str:
    """Plain-text two-column table (raw vs translated) with a signed delta column."""
    lines = []
    if header:
        lines.append(header)
    cols = ("Metrics", "Raw Frames", "Translated Frames", "Delta")
    body = []
    for row in rows:
        best_t = row.delta > 0
        raw = _fmt(row.raw, decimals) + ("" if best_t or row.sign == "=" else " *")
        tr = _fmt(row.translated, decimals) + (" *" if best_t else "")
        body.append((METRIC_LABELS[row.metric], raw, tr, f"{row.delta:+.{decimals}f}"))
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines.append(fmt.format(*cols))
    lines.append("  ".join("-" * w for w in widths))
    lines += [fmt.format(*b) for b in body]
    lines.append("(* marks the better column per metric)")
    return "\n".join(lines)


def render_report(report: MetricsReport, decimals: int = 2) -> str:
    width = max(len(v) for v in METRIC_LABELS.values())
    lines = [f"{'Metrics':<{width}}  Value (mean±std, n={report.precision.n}, axis={report.axis})"]
    for m in METRICS:
        lines.append(f"{METRIC_LABELS[m]:<{width}}  {_fmt(getattr(report, m), decimals)}")
    return "\n".join(lines)


def save_report(report: MetricsReport, path: str | Path, text: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    if text:
        path.with_suffix(".txt").write_text(render_report(report) + "\n")
    return path


def load_report(path: str | Path) -> MetricsReport:
    try:
        return MetricsReport.from_json(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# detection files: "frame_id x_min y_min x_max y_max confidence" per line


def write_detections(path: str | Path, detections: dict[str, Sequence[Detection]]) -> None:
    lines = []
    for frame_id, dets in detections.items():
        for d in dets:
            b = d.box
            lines.append(f"{frame_id} {b.x_min:.6g} {b.y_min:.6g} {b.x_max:.6g} {b.y_max:.6g} {d.confidence:.6g}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_detections(
    path: str | Path, image_sizes: dict[str, tuple[int, int]] | None = None
) -> dict[str, list[Detection]]:
    """Parse a detection file; boxes are clipped to (width, height) when sizes are given."""
    out: dict[str, list[Detection]] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read detections {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DataError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            x0, y0, x1, y1, conf = map(float, parts[1:])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        box = BoundingBox(x0, y0, x1, y1)
        if image_sizes and parts[0] in image_sizes:
            box = box.clip(*image_sizes[parts[0]])
        if box.is_degenerate:
            raise DataError(f"{path}:{lineno}: degenerate box {box.as_list()}")
        try:
            out.setdefault(parts[0], []).append(Detection(box, conf))
        except ValidationError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out
