import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from framerestore.degradation import (
    ArtifactKind,
    DegradationSpec,
    SpecSampler,
    apply_artifact,
    build_paired_corpus,
    compose,
    frame_seed,
    identity_sampler,
    line_kernel_taps,
    read_pairs,
)
from framerestore.errors import DataError, ParameterError
from framerestore.imaging import DatasetManifest, FrameRecord, Quality, load_image, save_image


@pytest.fixture
def img():
    return np.random.default_rng(0).random((12, 10, 3))


def spec(kind, seed=0, **params):
    return DegradationSpec(ArtifactKind(kind), params, seed)


class TestIdentities:
    def test_ghost_zero(self, img):
        np.testing.assert_array_equal(apply_artifact(img, spec("GhostColor")), img)

    def test_blur_one_tap(self, img):
        np.testing.assert_array_equal(apply_artifact(img, spec("MotionBlur", length=1, angle=1.0)), img)

    @pytest.mark.parametrize("length", [3, 7, 15, 31])
    @pytest.mark.parametrize("angle", [0.0, 0.4, math.pi / 2, 2.9])
    def test_blur_constant_image_exact(self, length, angle):
        flat = np.full((9, 11, 3), 0.3721)
        out = apply_artifact(flat, spec("MotionBlur", length=length, angle=angle))
        np.testing.assert_array_equal(out, flat)

    def test_compose_empty(self, img):
        np.testing.assert_array_equal(compose(img, []), img)

    def test_compose_identities(self, img):
        out = compose(img, [spec("GhostColor"), spec("MotionBlur", length=1)])
        np.testing.assert_array_equal(out, img)


def test_low_illumination_value():
    x = np.full((2, 2, 3), 0.25)
    out = apply_artifact(x, spec("LowIllumination", gain=1.0, gamma=2.0))
    assert out[0, 0, 0] == pytest.approx(0.0625, abs=1e-15)


def test_compose_low_illumination_twice():
    x = np.ones((2, 2, 3))
    s = spec("LowIllumination", gain=0.5, gamma=1.0)
    assert compose(x, [s, s])[0, 0, 0] == pytest.approx(0.25, abs=1e-15)


def interlace_oracle(img, d):
    h, w, _ = img.shape
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            src = x - d if y % 2 == 1 else x
            out[y, x] = img[y, min(max(src, 0), w - 1)]
    return out


def test_interlacing_ramp():
    ramp = np.tile(np.arange(4, dtype=np.float64)[None, :, None] / 4, (4, 1, 3))
    out = apply_artifact(ramp, spec("Interlacing", d=2))
    np.testing.assert_array_equal(out, interlace_oracle(ramp, 2))
    np.testing.assert_array_equal(out[1, :, 0], [0, 0, 0, 0.25])
    np.testing.assert_array_equal(out[0], ramp[0])


@pytest.mark.parametrize("d", [-8, -3, 0, 1, 5, 8])
def test_interlacing_oracle(img, d):
    np.testing.assert_array_equal(apply_artifact(img, spec("Interlacing", d=d)), interlace_oracle(img, d))


def ghost_oracle(img, dx_r, dy_r, dx_b, dy_b):
    h, w, _ = img.shape
    out = img.copy()
    for y in range(h):
        for x in range(w):
            out[y, x, 0] = img[min(max(y - dy_r, 0), h - 1), min(max(x - dx_r, 0), w - 1), 0]
            out[y, x, 2] = img[min(max(y - dy_b, 0), h - 1), min(max(x - dx_b, 0), w - 1), 2]
    return out


def test_ghost_color_oracle(img):
    out = apply_artifact(img, spec("GhostColor", dx_r=3, dy_r=-2, dx_b=-1, dy_b=4))
    np.testing.assert_array_equal(out, ghost_oracle(img, 3, -2, -1, 4))
    np.testing.assert_array_equal(out[..., 1], img[..., 1])


def test_horizontal_blur_brute_force(img):
    out = apply_artifact(img, spec("MotionBlur", length=3, angle=0.0))
    h, w, _ = img.shape
    ref = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            ref[y, x] = sum(img[y, min(max(x + k, 0), w - 1)] for k in (-1, 0, 1)) / 3
    np.testing.assert_allclose(out, ref, atol=1e-14)


@pytest.mark.parametrize("length,angle", [(5, 0.3), (9, 1.2), (7, 2.5), (31, 0.8)])
def test_blur_matches_kernel_correlation(img, length, angle):
    taps = line_kernel_taps(length, angle)
    r = (length - 1) // 2
    kernel = np.zeros((length, length))
    for dy, dx, wgt in taps:
        kernel[r + dy, r + dx] += wgt
    assert kernel.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(kernel, kernel[::-1, ::-1])
    ref = np.stack([ndimage.correlate(img[..., c], kernel, mode="nearest") for c in range(3)], axis=-1)
    out = apply_artifact(img, spec("MotionBlur", length=length, angle=angle))
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_occlusion_blobs_seeded(img):
    a = apply_artifact(img, spec("OcclusionBlobs", seed=5, count=3))
    b = apply_artifact(img, spec("OcclusionBlobs", seed=5, count=3))
    c = apply_artifact(img, spec("OcclusionBlobs", seed=6, count=3))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(apply_artifact(img, spec("OcclusionBlobs", count=0)), img)


def test_blobs_are_brownish():
    white = np.ones((32, 32, 3))
    out = apply_artifact(white, spec("OcclusionBlobs", seed=1, count=4))
    changed = np.any(out < 1.0, axis=-1)
    assert changed.any()
    px = out[changed]
    # brown tint: red >= green >= blue darkening
    assert np.all(px[:, 0] >= px[:, 1] - 1e-12) and np.all(px[:, 1] >= px[:, 2] - 1e-12)


@pytest.mark.parametrize(
    "kind,params,field",
    [
        ("GhostColor", {"dx_r": 9}, "dx_r"),
        ("GhostColor", {"dy_b": -9}, "dy_b"),
        ("Interlacing", {"d": 12}, "d"),
        ("Interlacing", {"d": 1.5}, "d"),
        ("MotionBlur", {"length": 4}, "length"),
        ("MotionBlur", {"length": 33}, "length"),
        ("MotionBlur", {"angle": math.pi}, "angle"),
        ("LowIllumination", {"gain": 0.0}, "gain"),
        ("LowIllumination", {"gain": 1.2}, "gain"),
        ("LowIllumination", {"gamma": 3.5}, "gamma"),
        ("OcclusionBlobs", {"count": 11}, "count"),
        ("OcclusionBlobs", {"radius": 1}, "radius"),
    ],
)
def test_parameter_errors_name_field(kind, params, field):
    with pytest.raises(ParameterError) as exc:
        DegradationSpec(kind, params)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_unknown_kind():
    with pytest.raises(ParameterError):
        DegradationSpec("Snow", {})


def test_spec_json_round_trip():
    s = spec("MotionBlur", seed=3, length=5, angle=0.25)
    assert DegradationSpec.from_json(s.to_json()) == s
    assert set(s.to_json()) == {"kind", "params", "seed"}


spec_strategy = st.one_of(
    st.builds(lambda a, b, c, d: spec("GhostColor", dx_r=a, dy_r=b, dx_b=c, dy_b=d),
              *[st.integers(-8, 8)] * 4),
    st.builds(lambda d: spec("Interlacing", d=d), st.integers(-8, 8)),
    st.builds(lambda n, t: spec("MotionBlur", length=2 * n + 1, angle=t),
              st.integers(0, 15), st.floats(0, math.pi, exclude_max=True)),
    st.builds(lambda g, y: spec("LowIllumination", gain=g, gamma=y),
              st.floats(0.01, 1.0), st.floats(1.0, 3.0)),
    st.builds(lambda n, s: spec("OcclusionBlobs", seed=s, count=n), st.integers(0, 10), st.integers(0, 999)),
)


@settings(max_examples=80, deadline=None)
@given(s=spec_strategy, seed=st.integers(0, 1000))
def test_artifact_properties(s, seed):
    x = np.random.default_rng(seed).random((9, 12, 3))
    out = apply_artifact(x, s)
    assert out.shape == x.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    np.testing.assert_array_equal(out, apply_artifact(x, s))
    if s.kind is ArtifactKind.GHOST_COLOR:
        np.testing.assert_array_equal(out[..., 1], x[..., 1])


def test_sampler_defaults_draw_one_to_three():
    sampler = SpecSampler()
    rng = np.random.default_rng(0)
    sizes = set()
    for _ in range(200):
        specs = sampler.sample(rng)
        kinds = [s.kind for s in specs]
        assert len(kinds) == len(set(kinds))
        sizes.add(len(specs))
    assert sizes == {1, 2, 3}


def test_sampler_required_and_json():
    sampler = SpecSampler(required=("LowIllumination",))
    rng = np.random.default_rng(1)
    for _ in range(50):
        assert ArtifactKind.LOW_ILLUMINATION in [s.kind for s in sampler.sample(rng)]
    assert SpecSampler.from_json(sampler.to_json()) == sampler


def test_frame_seed_stable():
    assert frame_seed(3, "abc") == frame_seed(3, "abc")
    assert frame_seed(3, "abc") != frame_seed(4, "abc")


# ---------------------------------------------------------------------------
# paired corpus


@pytest.fixture
def clean_manifest(tmp_path):
    rng = np.random.default_rng(2)
    recs = []
    for i in range(10):
        path = tmp_path / "clean" / f"c{i}.png"
        save_image(path, rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        recs.append(FrameRecord(f"c{i}", f"P{i % 3}", Quality.INFORMATIVE, str(path)))
    return DatasetManifest(tuple(recs), "clean")


def test_corpus_pairs(clean_manifest, tmp_path):
    corpus = build_paired_corpus(clean_manifest, SpecSampler(), tmp_path / "out", seed=4)
    assert len(corpus.pairs) == 10
    clean_ids = [c for c, _ in corpus.pairs]
    deg_ids = [d for _, d in corpus.pairs]
    assert sorted(clean_ids) == sorted(clean_manifest.frame_ids)
    assert len(set(deg_ids)) == 10
    assert all(r.quality is Quality.UNINFORMATIVE for r in corpus.degraded)
    assert read_pairs(tmp_path / "out" / "pairs.csv") == corpus.pairs
    assert (tmp_path / "out" / "pairs.csv").read_text().splitlines()[0] == "clean_id,degraded_id"


def test_corpus_deterministic(clean_manifest, tmp_path):
    build_paired_corpus(clean_manifest, SpecSampler(), tmp_path / "a", seed=4)
    build_paired_corpus(clean_manifest, SpecSampler(), tmp_path / "b", seed=4)
    for f in sorted((tmp_path / "a" / "degraded").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / "degraded" / f.name).read_bytes()
    assert (tmp_path / "a" / "specs.json").read_text() == (tmp_path / "b" / "specs.json").read_text()


def test_corpus_identity_sampler(clean_manifest, tmp_path):
    corpus = build_paired_corpus(clean_manifest, identity_sampler, tmp_path / "id", seed=0)
    for c, d in zip(clean_manifest, corpus.degraded):
        np.testing.assert_array_equal(load_image(c.path), load_image(d.path))


def test_corpus_io_error_names_path(clean_manifest, tmp_path):
    broken = clean_manifest.with_records([FrameRecord("x", "P", "informative", str(tmp_path / "missing.png"))])
    with pytest.raises(DataError, match="missing.png"):
        build_paired_corpus(broken, SpecSampler(), tmp_path / "out")
