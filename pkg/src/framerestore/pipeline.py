"""Stage orchestration for the raw-vs-translated detection experiment.

Each stage reads the artifacts produced by earlier stages, writes its own
outputs under ``<output_root>/<stage>/`` and records a ``stage.json`` with the
producing config hash and any provenance mismatches it noticed.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import config_hash, load_config_file
from .cyclegan import Translator, fit, translate
from .cyclegan.train import TrainConfig, read_checkpoint_manifest
from .cyclegan.translate import REFERENCE_FPS_NOTE
from .degradation import SpecSampler, build_paired_corpus
from .detector import toy_blob_detector
from .errors import ConfigError, DataError
from .figures import overlay, save_strip
from .imaging import (
    DEFAULT_SPLIT_RATIOS,
    DatasetManifest,
    Quality,
    load_image,
    load_manifest,
    patient_wise_split,
    psnr,
    save_image,
    save_manifest,
    validate_manifest,
)
from .metrics import (
    DEFAULT_CONF_THRESH,
    DEFAULT_IOU_THRESH,
    MetricsReport,
    compare_reports,
    evaluate,
    load_report,
    precision_recall_f1,
    read_detections,
    render_comparison,
    render_report,
    save_report,
)
from .synthetic import generate_scene_corpus

log = logging.getLogger(__name__)

SCENARIOS = ("raw", "translated")


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 0.6
    channel: int = 1
    min_area: int = 4


@dataclass(frozen=True)
class MetricsConfig:
    conf_thresh: float = DEFAULT_CONF_THRESH
    iou_thresh: float = DEFAULT_IOU_THRESH
    detector: DetectorConfig = DetectorConfig()


@dataclass(frozen=True)
class SyntheticConfig:
    n_frames: int = 200
    n_patients: int = 40
    image_size: int = 64
    seed: int = 0
    uninformative_fraction: float = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    data_root: str = "data"
    output_root: str = "out"
    split_ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    split_seed: int = 7
    degradation_seed: int = 1
    sampler: SpecSampler = SpecSampler()
    gan: TrainConfig = TrainConfig()
    metrics: MetricsConfig = MetricsConfig()
    synthetic: SyntheticConfig = SyntheticConfig()
    scenario: str = "raw"
    train: bool = False
    # stage inputs: manifest, checkpoint, detections, pairs, clean_manifest
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))

    def to_json(self) -> dict:
        out = asdict(self)
        out["sampler"] = self.sampler.to_json()
        out["gan"] = self.gan.to_json()
        out["split_ratios"] = list(self.split_ratios)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "sampler" in data:
                data["sampler"] = SpecSampler.from_json(data["sampler"])
            if "gan" in data:
                data["gan"] = TrainConfig.from_json(data["gan"])
            if "metrics" in data:
                m = dict(data["metrics"])
                m["detector"] = DetectorConfig(**m.get("detector", {}))
                data["metrics"] = MetricsConfig(**m)
            if "synthetic" in data:
                data["synthetic"] = SyntheticConfig(**data["synthetic"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid pipeline config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        return cls() if path is None else cls.from_json(load_config_file(path))

    @property
    def hash(self) -> str:
        """Hash of the experiment settings; file locations and stage inputs are excluded."""
        data = self.to_json()
        for key in ("data_root", "output_root", "inputs"):
            data.pop(key)
        return config_hash(data)

    def input_path(self, key: str, required: bool = True) -> Path | None:
        value = self.inputs.get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing input {key!r} (set inputs.{key} in the config)")
            return None
        path = Path(value)
        return path if path.is_absolute() else Path(self.data_root) / path


def e2e_config(**overrides) -> PipelineConfig:
    """Defaults for the closed synthetic loop, sized for CPU-only runs."""
    from .cyclegan import DiscriminatorConfig, GeneratorConfig

    gan = TrainConfig(
        generator=GeneratorConfig(base_width=16, n_res_blocks=3),
        discriminator=DiscriminatorConfig(base_width=16, min_input=32),
        epochs=30,
        batch_size=1,
        seed=0,
    )
    sampler = SpecSampler(required=("LowIllumination",), min_artifacts=1, max_artifacts=3,
                          gain_range=(0.4, 0.75))
    base = PipelineConfig(sampler=sampler, gan=gan, scenario="translated", train=True)
    return replace(base, **overrides)


# ---------------------------------------------------------------------------
# provenance


def write_stage_record(stage_dir: Path, stage: str, config: PipelineConfig,
                       consumed: dict[str, str | None] | None = None, **extra) -> dict:
    mismatches = {k: v for k, v in (consumed or {}).items() if v is not None and v != config.hash}
    for path, h in mismatches.items():
        log.warning("%s: consumed %s was produced by config %s, current config is %s", stage, path, h, config.hash)
    record = {
        "stage": stage,
        "config_hash": config.hash,
        "consumed": consumed or {},
        "provenance_mismatches": mismatches,
        **extra,
    }
    stage_dir.mkdir(parents=True, exist_ok=True)
    (stage_dir / "stage.json").write_text(json.dumps(record, indent=2, default=str) + "\n")
    return record


def _load_checked(path: Path) -> DatasetManifest:
    manifest = load_manifest(path)
    problems = validate_manifest(manifest)
    if problems:
        shown = "; ".join(f"{v.kind} {v.frame_id} {v.detail}" for v in problems[:5])
        raise DataError(f"manifest {path} has {len(problems)} violation(s): {shown}")
    return manifest


# ---------------------------------------------------------------------------
# stages


def stage_degrade(config: PipelineConfig, out: Path) -> dict:
    path = config.input_path("manifest")
    manifest = _load_checked(path)
    stage_dir = out / "degrade"
    corpus = build_paired_corpus(manifest, config.sampler, stage_dir, config.degradation_seed,
                                 config_hash=config.hash)
    return write_stage_record(stage_dir, "degrade", config, {str(path): manifest.config_hash},
                              n_pairs=len(corpus.pairs))


def stage_split(config: PipelineConfig, out: Path) -> dict:
    path = config.input_path("manifest")
    manifest = _load_checked(path)
    stage_dir = out / "split"
    parts = patient_wise_split(manifest, config.split_ratios, config.split_seed)
    sizes = {}
    for name, part in zip(("train", "val", "test"), parts):
        save_manifest(replace(part, config_hash=config.hash, seed_note=f"split seed {config.split_seed}"),
                      stage_dir / f"{name}.json")
        sizes[name] = len(part)
    return write_stage_record(stage_dir, "split", config, {str(path): manifest.config_hash}, sizes=sizes)


def domains(manifest: DatasetManifest) -> tuple[DatasetManifest, DatasetManifest]:
    """(uninformative -> domain A, informative -> domain B)."""
    a = manifest.filter(lambda r: r.quality is Quality.UNINFORMATIVE)
    b = manifest.filter(lambda r: r.quality is Quality.INFORMATIVE)
    return a, b


def stage_train(config: PipelineConfig, out: Path, manifest: DatasetManifest | None = None,
                consumed: dict | None = None) -> Path:
    if manifest is None:
        path = config.input_path("manifest")
        manifest = _load_checked(path)
        consumed = {str(path): manifest.config_hash}
    dom_a, dom_b = domains(manifest)
    if len(dom_a) == 0 or len(dom_b) == 0:
        raise DataError(f"training needs both domains; got {len(dom_a)} uninformative, {len(dom_b)} informative")
    stage_dir = out / "train"
    resume = config.inputs.get("resume")
    paths = fit(dom_a, dom_b, config.gan, stage_dir / "checkpoints", resume=resume)
    final = paths[-1] if paths else Path(resume)
    write_stage_record(stage_dir, "train", config, consumed, checkpoint=str(final),
                       n_domain_a=len(dom_a), n_domain_b=len(dom_b))
    return final


def stage_translate(config: PipelineConfig, out: Path, bench: bool = False,
                    echo: Callable[[str], None] = print) -> dict:
    ckpt = config.input_path("checkpoint")
    if not (ckpt / "manifest.json").is_file():
        raise ConfigError(f"checkpoint {ckpt} not found")
    path = config.input_path("manifest")
    manifest = _load_checked(path)
    translator = Translator.from_checkpoint(ckpt)
    stage_dir = out / "translate"
    result = translate(translator, manifest, stage_dir / "frames")
    translated = manifest.with_records(
        [replace(r, path=str(p.resolve()), quality=Quality.INFORMATIVE) for r, p in zip(manifest.records, result.paths)],
        name=f"{manifest.name}_translated",
    )
    save_manifest(replace(translated, config_hash=config.hash), stage_dir / "translated.json")
    timing = result.timing.to_json()
    if bench:
        timing["per_frame_seconds"] = result.timing.per_frame_seconds
        for fid, sec in zip(result.frame_ids, result.timing.per_frame_seconds):
            echo(f"{fid}\t{1000 * sec:.2f} ms")
        fps = result.timing.fps
        echo(f"frames: {result.timing.n_frames}  fps: {'n/a' if fps is None else f'{fps:.1f}'}"
             f"  (compute {result.timing.compute_seconds:.3f}s, io {result.timing.io_seconds:.3f}s)")
        echo(REFERENCE_FPS_NOTE)
    (stage_dir / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    ckpt_hash = read_checkpoint_manifest(ckpt).get("config_hash")
    return write_stage_record(stage_dir, "translate", config, {str(path): manifest.config_hash},
                              checkpoint=str(ckpt), checkpoint_config_hash=ckpt_hash, timing=timing)


def detect(config: PipelineConfig, manifest: DatasetManifest, detections: dict | None = None):
    """(detections, gts) per record, using the toy detector unless a detection map is given."""
    det_cfg = config.metrics.detector
    images = []
    for rec in manifest.records:
        if detections is not None:
            dets = detections.get(rec.frame_id, [])
        else:
            dets = toy_blob_detector(load_image(rec.path) / 255.0, det_cfg.threshold, det_cfg.channel,
                                     det_cfg.min_area)
        images.append((dets, list(rec.gt_boxes)))
    return images


def stage_detect_eval(config: PipelineConfig, out: Path) -> MetricsReport:
    path = config.input_path("manifest")
    manifest = _load_checked(path)
    det_path = config.input_path("detections", required=False)
    dets = read_detections(det_path) if det_path is not None else None
    report = evaluate(detect(config, manifest, dets), config.metrics.conf_thresh, config.metrics.iou_thresh,
                      manifest=manifest.name, detector="file" if dets is not None else "toy_blob",
                      config_hash=config.hash)
    stage_dir = out / "detect-eval"
    save_report(report, stage_dir / "report.json")
    write_stage_record(stage_dir, "detect-eval", config, {str(path): manifest.config_hash})
    return report


def stage_report(config: PipelineConfig, out: Path, raw_path, translated_path) -> str:
    raw, tr = load_report(raw_path), load_report(translated_path)
    rows = compare_reports(raw, tr)
    text = render_comparison(rows, header=f"raw: {raw_path}\ntranslated: {translated_path}")
    stage_dir = out / "report"
    stage_dir.mkdir(parents=True, exist_ok=True)
    (stage_dir / "comparison.txt").write_text(text + "\n")
    (stage_dir / "comparison.json").write_text(json.dumps(
        {r.metric: {"raw": r.raw.to_json(), "translated": r.translated.to_json(), "delta": r.delta, "sign": r.sign}
         for r in rows}, indent=2) + "\n")
    consumed = {str(raw_path): raw.notes.get("config_hash"), str(translated_path): tr.notes.get("config_hash")}
    write_stage_record(stage_dir, "report", config, consumed)
    return text


# ---------------------------------------------------------------------------
# scenarios


def _translated_manifest(manifest: DatasetManifest, translator, frame_dir: Path) -> DatasetManifest:
    """Replace every uninformative frame by its translation; informative frames pass through."""
    records = []
    for rec in manifest.records:
        if rec.quality is Quality.UNINFORMATIVE:
            img = translator(load_image(rec.path))
            path = frame_dir / f"{rec.frame_id}.png"
            save_image(path, img)
            rec = replace(rec, path=str(path.resolve()))
        records.append(rec)
    return manifest.with_records(records, name=f"{manifest.name}_translated")


def _resolve_translator(config: PipelineConfig, out: Path, train_part: DatasetManifest, translator):
    if translator is not None:
        return translator, None
    ckpt = config.input_path("checkpoint", required=False)
    if ckpt is not None:
        if not (ckpt / "manifest.json").is_file():
            raise ConfigError(f"checkpoint {ckpt} not found")
        return Translator.from_checkpoint(ckpt), ckpt
    if config.train:
        ckpt = stage_train(config, out, train_part, {"split:train": config.hash})
        return Translator.from_checkpoint(ckpt), ckpt
    raise ConfigError("scenario 'translated' needs inputs.checkpoint or train: true")


def run_scenario(config: PipelineConfig, out: str | Path | None = None, manifest: DatasetManifest | None = None,
                 translator=None, n_strips: int = 8, clean_lookup: dict | None = None) -> MetricsReport:
    """Evaluate detection on the test split, raw or with uninformative frames translated.

    In the translated scenario every uninformative frame of every split is
    replaced by its translation before evaluation.
    """
    out = Path(out or config.output_root)
    consumed = {}
    if manifest is None:
        path = config.input_path("manifest")
        manifest = _load_checked(path)
        consumed[str(path)] = manifest.config_hash
    if config.scenario == "translated" and translator is None and config.input_path("checkpoint", False) is None \
            and not config.train:
        raise ConfigError("scenario 'translated' needs inputs.checkpoint or train: true")

    splits = dict(zip(("train", "val", "test"), patient_wise_split(manifest, config.split_ratios, config.split_seed)))
    stage_dir = out / f"scenario_{config.scenario}"
    notes = {"scenario": config.scenario, "config_hash": config.hash, "evaluated_split": "test",
             "detector": "toy_blob"}
    originals = splits["test"]
    ckpt = None
    if config.scenario == "translated":
        translator, ckpt = _resolve_translator(config, out, splits["train"], translator)
        frame_dir = stage_dir / "frames"
        for name in ("train", "val", "test"):
            splits[name] = _translated_manifest(splits[name], translator, frame_dir)
            save_manifest(replace(splits[name], config_hash=config.hash), stage_dir / f"{name}.json")
        notes["translated_splits"] = ["train", "val", "test"]
        notes["checkpoint"] = None if ckpt is None else str(ckpt)

    test = splits["test"]
    images = detect(config, test)
    report = evaluate(images, config.metrics.conf_thresh, config.metrics.iou_thresh, **notes)
    save_report(report, stage_dir / "report.json")
    _write_strips(stage_dir / "strips", originals, test, images, n_strips, clean_lookup)
    write_stage_record(stage_dir, f"scenario_{config.scenario}", config, consumed)
    return report


def _write_strips(strip_dir: Path, originals: DatasetManifest, evaluated: DatasetManifest, images,
                  n: int, clean_lookup: dict | None = None) -> None:
    """clean twin (when known) | input | evaluated frame | GT (green) and detections (magenta)."""
    pairs = clean_lookup or {}
    shown = 0
    for orig, rec, (dets, gts) in zip(originals.records, evaluated.records, images):
        if shown >= n or orig.quality is not Quality.UNINFORMATIVE:
            continue
        panels = []
        if orig.frame_id in pairs:
            panels.append(load_image(pairs[orig.frame_id]))
        panels += [load_image(orig.path), load_image(rec.path), overlay(load_image(rec.path), gts, dets)]
        save_strip(strip_dir / f"{orig.frame_id}.png", panels)
        shown += 1


# ---------------------------------------------------------------------------
# closed synthetic loop


def mix_manifest(clean: DatasetManifest, degraded: DatasetManifest, pairs, fraction: float, seed: int,
                 name: str = "raw") -> DatasetManifest:
    """Per scene, keep the clean frame or swap in its degraded twin with probability ``fraction``."""
    rng = np.random.default_rng(seed)
    by_id = degraded.by_id()
    twin = dict(pairs)
    records = []
    for rec in clean.records:
        if rng.random() < fraction:
            records.append(by_id[twin[rec.frame_id]])
        else:
            records.append(rec)
    return DatasetManifest(tuple(records), name, f"mix seed {seed}, fraction {fraction}")


@dataclass
class E2EResult:
    raw: MetricsReport
    translated: MetricsReport
    psnr_degraded: list[float]
    psnr_translated: list[float]
    f1_degraded: float
    f1_translated: float
    comparison: str
    timings: dict

    @property
    def psnr_gain(self) -> float:
        return float(np.median(self.psnr_translated) - np.median(self.psnr_degraded))

    @property
    def f1_gain_points(self) -> float:
        return 100.0 * (self.f1_translated - self.f1_degraded)

    def summary(self) -> dict:
        return {
            "median_psnr_degraded_db": float(np.median(self.psnr_degraded)),
            "median_psnr_translated_db": float(np.median(self.psnr_translated)),
            "median_psnr_gain_db": self.psnr_gain,
            "f1_degraded_pct": 100.0 * self.f1_degraded,
            "f1_translated_pct": 100.0 * self.f1_translated,
            "f1_gain_points": self.f1_gain_points,
            "n_test_uninformative": len(self.psnr_degraded),
            "raw_report": self.raw.to_json(),
            "translated_report": self.translated.to_json(),
            "timings_seconds": self.timings,
        }


def e2e_synthetic(config: PipelineConfig | None = None, out: str | Path | None = None,
                  progress: Callable[[str], None] | None = None) -> E2EResult:
    """Scenes -> paired degradation -> mix -> train -> translate -> evaluate, with no external data."""
    config = config or e2e_config()
    out = Path(out or config.output_root)
    say = progress or (lambda msg: log.info(msg))
    timings = {}
    t0 = time.perf_counter()
    syn = config.synthetic
    scenes = generate_scene_corpus(out / "data", syn.n_frames, syn.n_patients, syn.image_size, syn.seed)
    corpus = build_paired_corpus(scenes, config.sampler, out / "corpus", config.degradation_seed,
                                 config_hash=config.hash)
    raw_manifest = mix_manifest(scenes, corpus.degraded, corpus.pairs, syn.uninformative_fraction, syn.seed + 1)
    save_manifest(replace(raw_manifest, config_hash=config.hash), out / "raw.json")
    timings["data"] = time.perf_counter() - t0
    say(f"data ready: {len(scenes)} scenes, {sum(r.quality is Quality.UNINFORMATIVE for r in raw_manifest)} uninformative")

    clean_of = {deg: clean for clean, deg in corpus.pairs}
    clean_paths = {r.frame_id: r.path for r in scenes.records}
    lookup = {deg: clean_paths[clean] for deg, clean in clean_of.items()}
    cfg = config

    t0 = time.perf_counter()
    raw_report = run_scenario(replace(cfg, scenario="raw"), out, raw_manifest, clean_lookup=lookup)
    timings["raw_scenario"] = time.perf_counter() - t0
    say("raw scenario:\n" + render_report(raw_report))

    t0 = time.perf_counter()
    train_part = patient_wise_split(raw_manifest, cfg.split_ratios, cfg.split_seed)[0]
    ckpt = config.input_path("checkpoint", required=False)
    if ckpt is None:
        ckpt = stage_train(cfg, out, train_part, {str(out / "raw.json"): config.hash})
    timings["train"] = time.perf_counter() - t0
    translator = Translator.from_checkpoint(ckpt)

    t0 = time.perf_counter()
    tr_report = run_scenario(replace(cfg, scenario="translated"), out, raw_manifest, translator=translator,
                             clean_lookup=lookup)
    timings["translated_scenario"] = time.perf_counter() - t0
    say("translated scenario:\n" + render_report(tr_report))

    # paired oracle over the uninformative test frames
    test = patient_wise_split(raw_manifest, cfg.split_ratios, cfg.split_seed)[2]
    psnr_deg, psnr_tr, imgs_deg, imgs_tr = [], [], [], []
    det = cfg.metrics.detector
    for rec in test.records:
        if rec.quality is not Quality.UNINFORMATIVE:
            continue
        clean = load_image(lookup[rec.frame_id])
        deg = load_image(rec.path)
        trans = translator(deg)
        psnr_deg.append(psnr(clean, deg))
        psnr_tr.append(psnr(clean, trans))
        imgs_deg.append((toy_blob_detector(deg / 255.0, det.threshold, det.channel, det.min_area), list(rec.gt_boxes)))
        imgs_tr.append((toy_blob_detector(trans / 255.0, det.threshold, det.channel, det.min_area), list(rec.gt_boxes)))
    if not psnr_deg:
        raise DataError("the test split holds no uninformative frames; enlarge the corpus")
    f1_deg = precision_recall_f1(imgs_deg, cfg.metrics.conf_thresh, cfg.metrics.iou_thresh)[2]
    f1_tr = precision_recall_f1(imgs_tr, cfg.metrics.conf_thresh, cfg.metrics.iou_thresh)[2]

    comparison = render_comparison(compare_reports(raw_report, tr_report),
                                   header="Synthetic corpus: raw vs translated (test split, toy detector)")
    result = E2EResult(raw_report, tr_report, psnr_deg, psnr_tr, f1_deg, f1_tr, comparison, timings)
    (out / "comparison.txt").write_text(comparison + "\n")
    (out / "e2e_summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
    write_stage_record(out, "e2e-synthetic", config, {}, summary_file="e2e_summary.json")
    say(comparison)
    return result
