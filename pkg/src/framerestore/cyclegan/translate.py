from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..errors import ShapeError
from ..imaging import DatasetManifest, denormalize, load_image, normalize, save_image
from .networks import ResnetGenerator, from_batch, to_batch
from .train import TrainConfig, load_generator

REFERENCE_FPS_NOTE = "reference: 14 frames per second reported on a Titan Xp GPU"


@dataclass
class TimingReport:
    n_frames: int
    compute_seconds: float
    io_seconds: float
    per_frame_seconds: list[float] = field(default_factory=list)

    @property
    def fps(self) -> float | None:
        if self.n_frames == 0 or self.compute_seconds <= 0:
            return None
        return self.n_frames / self.compute_seconds

    @property
    def fps_with_io(self) -> float | None:
        total = self.compute_seconds + self.io_seconds
        if self.n_frames == 0 or total <= 0:
            return None
        return self.n_frames / total

    def to_json(self) -> dict:
        out = {
            "n_frames": self.n_frames,
            "compute_seconds": self.compute_seconds,
            "io_seconds": self.io_seconds,
        }
        if self.fps is not None:
            out["fps"] = self.fps
            out["fps_with_io"] = self.fps_with_io
        return out


class Translator:
    """Callable uint8 -> uint8 wrapper around a domain-A-to-B generator."""

    def __init__(self, generator: ResnetGenerator):
        self.generator = generator.eval()
        self.dtype = next(generator.parameters()).dtype

    @classmethod
    def from_checkpoint(cls, path, expected: TrainConfig | None = None) -> "Translator":
        return cls(load_generator(path, "AB", expected))

    def check(self, img: np.ndarray) -> None:
        h, w = np.asarray(img).shape[:2]
        if h % 4 or w % 4:
            raise ShapeError(f"image {h}x{w} is not divisible by 4")

    def __call__(self, img: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            out = self.generator(to_batch(normalize(img), self.dtype))
        return denormalize(from_batch(out)[0])


class IdentityTranslator:
    """Stand-in translator that returns frames unchanged."""

    def check(self, img: np.ndarray) -> None:
        pass

    def __call__(self, img: np.ndarray) -> np.ndarray:
        return np.asarray(img, dtype=np.uint8).copy()


@dataclass
class TranslationResult:
    frame_ids: list[str]
    images: list[np.ndarray]
    timing: TimingReport
    paths: list[Path] = field(default_factory=list)


def translate(
    translator,
    source: DatasetManifest | Sequence[np.ndarray],
    out_dir: str | Path | None = None,
) -> TranslationResult:
    """Translate every frame; preconditions on all frames are checked first."""
    if not callable(translator):
        translator = Translator.from_checkpoint(translator)
    io = 0.0
    if isinstance(source, DatasetManifest):
        ids = source.frame_ids
        t0 = time.perf_counter()
        images = [load_image(r.path) for r in source.records]
        io += time.perf_counter() - t0
    else:
        images = [np.asarray(x, dtype=np.uint8) for x in source]
        ids = [f"frame_{i:05d}" for i in range(len(images))]
    for img in images:
        translator.check(img)

    outputs, per_frame = [], []
    for img in images:
        t0 = time.perf_counter()
        outputs.append(translator(img))
        per_frame.append(time.perf_counter() - t0)

    paths = []
    if out_dir is not None:
        t0 = time.perf_counter()
        for fid, img in zip(ids, outputs):
            path = Path(out_dir) / f"{fid}.png"
            save_image(path, img)
            paths.append(path)
        io += time.perf_counter() - t0
    timing = TimingReport(len(images), float(sum(per_frame)), io, per_frame)
    return TranslationResult(ids, outputs, timing, paths)
