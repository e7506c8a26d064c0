"""Procedural colonoscopy-like scenes with elliptical "polyps" and exact boxes."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .imaging import BoundingBox, DatasetManifest, FrameRecord, Quality, from_unit, save_image, save_manifest

TISSUE = np.array([0.80, 0.36, 0.32])
POLYP = np.array([0.93, 0.82, 0.56])


def _ellipse_mask(h, w, cy, cx, ay, ax, theta):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
    c, s = math.cos(theta), math.sin(theta)
    u = ((xx - cx) * c + (yy - cy) * s) / ax
    v = (-(xx - cx) * s + (yy - cy) * c) / ay
    return u * u + v * v


def make_scene(rng: np.random.Generator, size: int = 64, tint=None,
               max_polyps: int = 2) -> tuple[np.ndarray, list[BoundingBox]]:
    """One display-scale frame and the tight pixel boxes of its polyps.

    Background green stays below ~0.5 and polyp green above ~0.7, so a
    green-channel threshold near 0.6 separates them on clean frames.
    """
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64) / size
    tissue = TISSUE + (np.zeros(3) if tint is None else tint)

    # light falloff around an off-centre lumen
    ly, lx = rng.uniform(0.3, 0.7, size=2)
    dist = np.hypot(yy - ly, xx - lx)
    light = 0.78 + 0.22 * np.clip(dist / 0.5, 0, 1) ** 0.7
    texture = sum(
        rng.uniform(0.015, 0.035)
        * np.sin(2 * math.pi * (rng.uniform(1, 4) * (xx * math.cos(t) + yy * math.sin(t))) + rng.uniform(0, 6.3))
        for t in rng.uniform(0, math.pi, size=3)
    )
    img = np.clip(tissue[None, None, :] * light[..., None] + texture[..., None], 0, 1)

    # mucosal folds: darker bands along circles around the lumen
    for _ in range(int(rng.integers(1, 4))):
        r0 = rng.uniform(0.15, 0.6)
        band = np.exp(-(((dist - r0) / rng.uniform(0.015, 0.04)) ** 2))
        img *= (1 - 0.25 * band)[..., None]

    boxes = []
    n_polyps = int(rng.integers(1, max_polyps + 1))
    placed = []
    for _ in range(n_polyps):
        for _attempt in range(50):
            ay, ax = rng.uniform(0.09, 0.17, size=2) * size
            theta = rng.uniform(0, math.pi)
            r = max(ay, ax)
            cy, cx = rng.uniform(r + 2, size - r - 2, size=2)
            if all(math.hypot(cy - py, cx - px) > r + pr + 4 for py, px, pr in placed):
                break
        else:
            continue
        placed.append((cy, cx, r))
        rho = _ellipse_mask(h, w, cy, cx, ay, ax, theta)
        mask = rho <= 1.0
        if not mask.any():
            continue
        shade = 0.9 + 0.1 * (1 - np.clip(rho, 0, 1))
        img[mask] = np.clip(POLYP[None, :] * shade[mask][:, None], 0, 1)
        ys, xs = np.nonzero(mask)
        boxes.append(BoundingBox(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1)))
    return img, boxes


def generate_scene_corpus(
    out_dir: str | Path,
    n_frames: int = 200,
    n_patients: int = 40,
    size: int = 64,
    seed: int = 0,
    name: str = "synthetic",
) -> DatasetManifest:
    """Write ``n_frames`` clean scenes spread over ``n_patients`` and their manifest."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    tints = rng.uniform(-0.05, 0.05, size=(n_patients, 3)) * np.array([1.0, 0.6, 1.0])
    records = []
    for i in range(n_frames):
        patient = i % n_patients
        img, boxes = make_scene(rng, size, tints[patient])
        frame_id = f"scene_{i:04d}"
        path = out_dir / "clean" / f"{frame_id}.png"
        save_image(path, from_unit(img))
        records.append(FrameRecord(frame_id, f"patient_{patient:03d}", Quality.INFORMATIVE,
                                   str(path.resolve()), tuple(boxes)))
    manifest = DatasetManifest(tuple(records), name, f"scene seed {seed}")
    save_manifest(manifest, out_dir / "scenes.json")
    return manifest
