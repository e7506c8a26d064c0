"""
Detection metrics
=================

IoU, greedy matching, 101-point AP and the raw-vs-translated comparison
table, worked on small inputs.
"""

from framerestore.imaging import BoundingBox as B
from framerestore.imaging import Detection
from framerestore.metrics import (
    MetricsReport,
    Stat,
    compare_reports,
    f1_score,
    iou,
    match_detections,
    ranked_average_precision,
    render_comparison,
)

print("IoU of two half-overlapping squares:", iou(B(0, 0, 10, 10), B(5, 0, 15, 10)))

# two detections on one ground truth: the more confident one claims it
gts = [B(0, 0, 10, 10)]
dets = [Detection(B(1, 0, 11, 10), 0.6), Detection(B(0, 0, 10, 10), 0.9)]
m = match_detections(dets, gts, 0.5)
print("true-positive flag per detection:", m.tp, "false positives:", m.n_fp)

# ranked hits TP, FP, TP against 2 ground truths
print("AP of (TP, FP, TP) / 2 GT:", ranked_average_precision([True, False, True], 2), "= 253/303")

# published raw vs translated figures (percent, mean and std over runs)
raw = MetricsReport(Stat(92.03, 0.60), Stat(88.9, 3.12), Stat(90.4, 1.51), Stat(95.37, 0.95), Stat(57.53, 0.32))
translated = MetricsReport(Stat(93, 0.87), Stat(90.2, 1.3), Stat(91.57, 0.38), Stat(95.6, 0.21), Stat(57.07, 0.31))
print(render_comparison(compare_reports(raw, translated)))

for name, r in (("raw", raw), ("translated", translated)):
    recomputed = f1_score(r.precision.mean, r.recall.mean)
    print(f"{name}: F1 from P and R = {recomputed:.3f}, stored {r.f1.mean}")
