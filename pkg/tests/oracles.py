"""Independent reference implementations used by the unit and acceptance tests."""

import numpy as np

from framerestore.imaging import BoundingBox as B
from framerestore.imaging import Detection


def reference_split(frames_per_patient: dict, ratios, seed):
    """Independent re-statement of the seeded shuffle and greedy fill."""
    patients = sorted(frames_per_patient)
    shuffled = [patients[i] for i in np.random.default_rng(seed).permutation(len(patients))]
    total = sum(frames_per_patient.values())
    targets = [ratios[0] * total, (ratios[0] + ratios[1]) * total]
    groups = [[], [], []]
    count = 0
    for pid in shuffled:
        k = 0
        if count >= targets[0] - 1e-9 * total:
            k = 1
            if count >= targets[1] - 1e-9 * total:
                k = 2
        groups[k].append(pid)
        count += frames_per_patient[pid]
    return [sorted(g) for g in groups]


def random_instance(rng, max_det=20, max_gt=10, size=40):
    n_gt = int(rng.integers(0, max_gt + 1))
    gts = []
    for _ in range(n_gt):
        x, y = rng.uniform(0, size, 2)
        w, h = rng.uniform(2, 10, 2)
        gts.append(B(x, y, x + w, y + h))
    dets = []
    for _ in range(int(rng.integers(0, max_det + 1))):
        if gts and rng.random() < 0.7:
            g = gts[int(rng.integers(len(gts)))]
            j = rng.normal(0, 1.5, 4)
            box = B(g.x_min + j[0], g.y_min + j[1], g.x_max + j[2], g.y_max + j[3])
            if box.is_degenerate:
                box = g
        else:
            x, y = rng.uniform(0, size, 2)
            box = B(x, y, x + rng.uniform(2, 10), y + rng.uniform(2, 10))
        dets.append(Detection(box, float(rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]) if rng.random() < 0.3 else rng.random())))
    return dets, gts


def exact_staircase_ap(tp_ranked, n_gt):
    """All-point interpolated AP by explicit envelope integration."""
    tp = fp = 0
    points = []
    for hit in tp_ranked:
        tp += hit
        fp += not hit
        points.append((tp / n_gt, tp / (tp + fp)))
    area, prev_r = 0.0, 0.0
    for k, (r, _) in enumerate(points):
        envelope = max(p for _, p in points[k:])
        area += (r - prev_r) * envelope
        prev_r = r
    return area


def brute_101(tp_ranked, n_gt):
    tp = fp = 0
    points = []
    for hit in tp_ranked:
        tp += hit
        fp += not hit
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for i in range(101):
        level = i / 100
        total += max([p for r, p in points if r >= level], default=0.0)
    return total / 101
