import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framerestore.detector import toy_blob_detector
from framerestore.errors import DataError, ValidationError
from framerestore.imaging import BoundingBox, Detection
from oracles import brute_101, random_instance

from framerestore.metrics import (
    COCO_THRESHOLDS,
    MetricsReport,
    Stat,
    aggregate_runs,
    average_precision,
    compare_reports,
    f1_consistency_gap,
    f1_score,
    iou,
    load_report,
    map_range,
    match_detections,
    precision_recall_f1,
    ranked_average_precision,
    read_detections,
    render_comparison,
    save_report,
    write_detections,
)

B = BoundingBox


def det(x0, y0, x1, y1, conf):
    return Detection(B(x0, y0, x1, y1), conf)


# published raw vs translated results, (mean, std) in percent
PUBLISHED_RAW = MetricsReport(Stat(92.03, 0.60), Stat(88.9, 3.12), Stat(90.4, 1.51), Stat(95.37, 0.95), Stat(57.53, 0.32))
PUBLISHED_TRANSLATED = MetricsReport(Stat(93, 0.87), Stat(90.2, 1.3), Stat(91.57, 0.38), Stat(95.6, 0.21), Stat(57.07, 0.31))


class TestIoU:
    def test_examples(self):
        assert iou(B(0, 0, 10, 10), B(0, 0, 10, 10)) == 1.0
        assert iou(B(0, 0, 10, 10), B(20, 20, 30, 30)) == 0.0
        assert iou(B(0, 0, 10, 10), B(10, 0, 20, 10)) == 0.0
        assert iou(B(0, 0, 10, 10), B(5, 0, 15, 10)) == 50 / 150

    def test_degenerate(self):
        with pytest.raises(ValidationError):
            iou(B(0, 0, 0, 5), B(0, 0, 1, 1))

    @given(st.lists(st.floats(-50, 50), min_size=8, max_size=8))
    def test_properties(self, c):
        b1 = B(min(c[0], c[1]), min(c[2], c[3]), max(c[0], c[1]) + 0.5, max(c[2], c[3]) + 0.5)
        b2 = B(min(c[4], c[5]), min(c[6], c[7]), max(c[4], c[5]) + 0.5, max(c[6], c[7]) + 0.5)
        v = iou(b1, b2)
        assert 0.0 <= v <= 1.0
        assert v == iou(b2, b1)
        assert iou(b1, b1) == pytest.approx(1.0)


class TestMatching:
    def test_exact_hit(self):
        m = match_detections([det(0, 0, 10, 10, 0.9)], [B(0, 0, 10, 10)], 0.5)
        assert (m.n_tp, m.n_fp, m.n_fn) == (1, 0, 0)

    def test_no_detections(self):
        m = match_detections([], [B(0, 0, 1, 1)] * 3, 0.5)
        assert (m.n_tp, m.n_fp, m.n_fn) == (0, 0, 3)

    def test_confidence_wins(self):
        gt = B(0, 0, 10, 10)
        d1 = det(0, 0, 10, 6, 0.9)  # IoU 0.6
        d2 = det(0, 0, 10, 7, 0.8)  # IoU 0.7
        assert iou(d1.box, gt) == pytest.approx(0.6) and iou(d2.box, gt) == pytest.approx(0.7)
        m = match_detections([d2, d1], [gt], 0.5)
        assert m.tp == [False, True]
        assert m.matched_gt == [None, 0]

    def test_ties_keep_input_order(self):
        gt = B(0, 0, 10, 10)
        m = match_detections([det(0, 0, 10, 9, 0.5), det(0, 0, 10, 10, 0.5)], [gt], 0.5)
        assert m.tp == [True, False]

    def test_claims_best_unmatched(self):
        gts = [B(0, 0, 10, 10), B(2, 0, 12, 10)]
        m = match_detections([det(1, 0, 11, 10, 0.9), det(0, 0, 10, 10, 0.8)], gts, 0.5)
        # first detection overlaps both equally-ish; it must take its best, leaving the other
        assert m.n_tp == 2 and sorted(m.matched_gt) == [0, 1]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            match_detections([], [], 0.0)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**6), thresh=st.sampled_from([0.3, 0.5, 0.75]))
def test_matching_invariants(seed, thresh):
    dets, gts = random_instance(np.random.default_rng(seed))
    m = match_detections(dets, gts, thresh)
    claimed = [g for g in m.matched_gt if g is not None]
    assert len(claimed) == len(set(claimed))
    assert m.n_tp <= min(len(dets), len(gts))
    for i, g in enumerate(m.matched_gt):
        assert (g is not None) == m.tp[i]
        if g is not None:
            assert iou(dets[i].box, gts[g]) >= thresh


class TestPRF:
    def test_perfect(self):
        gt = [B(0, 0, 5, 5)]
        assert precision_recall_f1([([det(0, 0, 5, 5, 0.9)], gt)]) == (1.0, 1.0, 1.0)

    def test_empty_conventions(self):
        assert precision_recall_f1([([], [])]) == (1.0, 1.0, 1.0)
        p, r, f = precision_recall_f1([([], [B(0, 0, 1, 1)])])
        assert (p, r, f) == (1.0, 0.0, 0.0)
        assert f1_score(0.0, 0.0) == 0.0

    def test_conf_filter(self):
        gt = [B(0, 0, 5, 5)]
        imgs = [([det(0, 0, 5, 5, 0.2)], gt)]
        assert precision_recall_f1(imgs, conf_thresh=0.25)[1] == 0.0
        assert precision_recall_f1(imgs, conf_thresh=0.1)[1] == 1.0

    @pytest.mark.parametrize("p,r,expected,printed", [(93.0, 90.2, 91.58, "91.57"), (92.03, 88.9, 90.44, "90.4")])
    def test_published_f1(self, p, r, expected, printed):
        assert f1_score(p, r) == pytest.approx(expected, abs=0.005)
        gap, allowed = f1_consistency_gap(p, r, printed)
        assert gap <= allowed

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10**6), t1=st.floats(0, 1), t2=st.floats(0, 1))
    def test_recall_monotone_in_conf(self, seed, t1, t2):
        rng = np.random.default_rng(seed)
        imgs = [random_instance(rng) for _ in range(3)]
        lo, hi = min(t1, t2), max(t1, t2)
        assert precision_recall_f1(imgs, hi)[1] <= precision_recall_f1(imgs, lo)[1]


class TestAP:
    def test_single_hit(self):
        assert ranked_average_precision([True], 1) == 1.0

    def test_no_detections(self):
        assert ranked_average_precision([], 3) == 0.0

    def test_staircase_example(self):
        ap = ranked_average_precision([True, False, True], 2)
        assert ap == pytest.approx(253 / 303, abs=1e-12)
        assert brute_101([True, False, True], 2) == pytest.approx(253 / 303, abs=1e-12)

    def test_zero_gt(self):
        with pytest.raises(DataError):
            ranked_average_precision([True], 0)
        with pytest.raises(DataError):
            average_precision([([det(0, 0, 1, 1, 0.5)], [])])

    def test_pooled_ranking_across_images(self):
        imgs = [([det(0, 0, 4, 4, 0.9)], [B(0, 0, 4, 4)]), ([det(9, 9, 12, 12, 0.8)], [B(0, 0, 4, 4)]),
                ([det(0, 0, 4, 4, 0.7)], [B(0, 0, 4, 4)])]
        # pooled ranking TP, FP, TP over 3 GTs
        assert average_precision(imgs) == pytest.approx(brute_101([True, False, True], 3), abs=1e-12)

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_101(self, seed):
        rng = np.random.default_rng(seed)
        flags = list(rng.random(int(rng.integers(0, 21))) < 0.5)
        n_gt = max(1, int(sum(flags)) + int(rng.integers(0, 4)))
        assert ranked_average_precision(flags, n_gt) == pytest.approx(brute_101(flags, n_gt), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_low_conf_fp_never_increases_ap(self, seed):
        dets, gts = random_instance(np.random.default_rng(seed))
        if not gts:
            gts = [B(0, 0, 5, 5)]
        base = average_precision([(dets, gts)])
        low = min([d.confidence for d in dets], default=1.0) / 2
        extra = dets + [det(100, 100, 101, 101, low)]
        assert average_precision([(extra, gts)]) <= base + 1e-12


class TestMapRange:
    def test_perfect(self):
        gts = [B(0, 0, 10, 10), B(20, 20, 30, 35)]
        dets = [Detection(g, 0.9) for g in gts]
        assert map_range([(dets, gts)]) == (1.0, 1.0)

    def test_iou_exactly_point_six(self):
        gts = [B(0, 0, 10, 10), B(20, 0, 30, 10)]
        dets = [det(0, 0, 6, 10, 0.9), det(20, 0, 26, 10, 0.8)]
        assert all(iou(d.box, g) == 0.6 for d, g in zip(dets, gts))
        per_t = [average_precision([(dets, gts)], t) for t in COCO_THRESHOLDS]
        assert per_t == [1.0, 1.0, 1.0] + [0.0] * 7
        m50, m5095 = map_range([(dets, gts)])
        assert m50 == 1.0 and m5095 == pytest.approx(0.3, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_map5095_below_map50(self, seed):
        dets, gts = random_instance(np.random.default_rng(seed))
        if not gts:
            return
        m50, m5095 = map_range([(dets, gts)])
        assert m5095 <= m50 + 1e-12


class TestReports:
    def test_aggregate_single(self):
        r = MetricsReport.point(90, 80, 84.7, 70, 40)
        agg = aggregate_runs([r])
        assert agg.precision.std == 0.0 and agg.precision.n == 1

    def test_aggregate_three(self):
        runs = [MetricsReport.point(v, v, v, v, v) for v in (92, 93, 94)]
        agg = aggregate_runs(runs)
        assert agg.precision.mean == pytest.approx(93.0) and agg.precision.std == pytest.approx(1.0)
        assert aggregate_runs(runs[::-1]) == agg

    def test_aggregate_empty(self):
        with pytest.raises(ValueError):
            aggregate_runs([])

    def test_range_check(self):
        with pytest.raises(ValidationError):
            MetricsReport.point(101, 0, 0, 0, 0)

    def test_published_deltas(self):
        rows = compare_reports(PUBLISHED_RAW, PUBLISHED_TRANSLATED)
        deltas = {r.metric: r.delta for r in rows}
        expected = {"precision": 0.97, "recall": 1.3, "f1": 1.17, "map50": 0.23, "map5095": -0.46}
        for k, v in expected.items():
            assert deltas[k] == pytest.approx(v, abs=1e-9)
        assert [r.sign for r in rows] == ["+", "+", "+", "+", "-"]
        text = render_comparison(rows)
        assert "+0.97" in text and "-0.46" in text and "92.03±0.60" in text and "93.00±0.87" in text

    def test_identical_and_antisymmetric(self):
        assert all(r.delta == 0 and r.sign == "=" for r in compare_reports(PUBLISHED_RAW, PUBLISHED_RAW))
        fwd = compare_reports(PUBLISHED_RAW, PUBLISHED_TRANSLATED)
        back = compare_reports(PUBLISHED_TRANSLATED, PUBLISHED_RAW)
        assert all(a.delta == -b.delta for a, b in zip(fwd, back))

    def test_json_round_trip(self, tmp_path):
        path = save_report(PUBLISHED_RAW, tmp_path / "r.json")
        data = json.loads(path.read_text())
        assert data["precision"] == {"mean": 92.03, "std": 0.6, "n": 1}
        assert load_report(path) == PUBLISHED_RAW
        assert (tmp_path / "r.txt").exists()


def test_detection_file_round_trip(tmp_path):
    dets = {"f1": [det(1, 2, 3, 4, 0.5)], "f2": [det(0, 0, 10, 10, 0.25), det(5, 5, 9, 9, 1.0)]}
    write_detections(tmp_path / "d.txt", dets)
    assert (tmp_path / "d.txt").read_text().splitlines()[0] == "f1 1 2 3 4 0.5"
    assert read_detections(tmp_path / "d.txt") == dets
    clipped = read_detections(tmp_path / "d.txt", {"f2": (8, 8)})
    assert clipped["f2"][0].box == B(0, 0, 8, 8)


def test_detection_file_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("f1 1 2 3\n")
    with pytest.raises(DataError, match="bad.txt:1"):
        read_detections(tmp_path / "bad.txt")
    (tmp_path / "conf.txt").write_text("f1 1 2 3 4 1.5\n")
    with pytest.raises(DataError):
        read_detections(tmp_path / "conf.txt")


# ---------------------------------------------------------------------------
# toy detector


def flood_fill_components(mask):
    """Iterative 8-connected flood fill; returns tight pixel boxes sorted."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    boxes = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            stack, ys, xs = [(y, x)], [], []
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                ys.append(cy)
                xs.append(cx)
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
            boxes.append((min(xs), min(ys), max(xs) + 1, max(ys) + 1))
    return sorted(boxes)


def ellipse(img, cy, cx, ay, ax, value=0.9):
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    mask = ((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2 <= 1
    img[mask] = value
    ys, xs = np.nonzero(mask)
    return B(xs.min(), ys.min(), xs.max() + 1, ys.max() + 1)


def test_blank_image():
    assert toy_blob_detector(np.zeros((16, 16, 3)), 0.5) == []


def test_single_ellipse():
    img = np.zeros((32, 32, 3))
    box = ellipse(img, 15, 12, 6, 4)
    dets = toy_blob_detector(img, 0.5)
    assert len(dets) == 1
    assert dets[0].box.contains(box)
    assert dets[0].confidence == pytest.approx(0.9)


def test_two_ellipses_vs_flood_fill():
    img = np.zeros((40, 48, 3))
    ellipse(img, 10, 10, 5, 7)
    ellipse(img, 28, 35, 6, 5, 0.7)
    dets = toy_blob_detector(img, 0.5)
    got = sorted((d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max) for d in dets)
    assert len(dets) == 2
    assert got == flood_fill_components(img[..., 1] > 0.5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_detector_matches_flood_fill_random(seed):
    plane = np.random.default_rng(seed).random((14, 17))
    img = np.repeat(plane[..., None], 3, axis=2)
    dets = toy_blob_detector(img, 0.7)
    got = sorted((int(d.box.x_min), int(d.box.y_min), int(d.box.x_max), int(d.box.y_max)) for d in dets)
    assert got == flood_fill_components(plane > 0.7)


def test_min_area_filter():
    img = np.zeros((16, 16, 3))
    img[2, 2] = 1.0
    ellipse(img, 10, 10, 3, 3)
    assert len(toy_blob_detector(img, 0.5)) == 2
    assert len(toy_blob_detector(img, 0.5, min_area=4)) == 1
