"""Side-by-side PNG strips: clean | degraded | translated | detection overlay."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .imaging import BoundingBox, Detection, save_image

GT_COLOR = (0, 255, 0)
DET_COLOR = (255, 0, 255)


def draw_boxes(img: np.ndarray, boxes: Sequence[BoundingBox], color=GT_COLOR) -> np.ndarray:
    out = np.asarray(img, dtype=np.uint8).copy()
    h, w = out.shape[:2]
    for b in boxes:
        x0, y0 = int(np.clip(np.floor(b.x_min), 0, w - 1)), int(np.clip(np.floor(b.y_min), 0, h - 1))
        x1, y1 = int(np.clip(np.ceil(b.x_max) - 1, 0, w - 1)), int(np.clip(np.ceil(b.y_max) - 1, 0, h - 1))
        out[y0, x0 : x1 + 1] = color
        out[y1, x0 : x1 + 1] = color
        out[y0 : y1 + 1, x0] = color
        out[y0 : y1 + 1, x1] = color
    return out


def overlay(img: np.ndarray, gts: Sequence[BoundingBox], dets: Sequence[Detection]) -> np.ndarray:
    return draw_boxes(draw_boxes(img, gts, GT_COLOR), [d.box for d in dets], DET_COLOR)


def strip(panels: Sequence[np.ndarray], gap: int = 2) -> np.ndarray:
    h = max(p.shape[0] for p in panels)
    parts = []
    for i, p in enumerate(panels):
        pad = np.full((h, p.shape[1], 3), 255, np.uint8)
        pad[: p.shape[0]] = p
        parts.append(pad)
        if i < len(panels) - 1:
            parts.append(np.full((h, gap, 3), 255, np.uint8))
    return np.concatenate(parts, axis=1)


def save_strip(path: str | Path, panels: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    save_image(path, strip(panels))
    return path
