"""Threshold-and-label blob detector used as a stand-in for a learned detector."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imaging import BoundingBox, Detection

# 8-connectivity
_STRUCTURE = np.ones((3, 3), dtype=bool)


def toy_blob_detector(
    img: np.ndarray,
    threshold: float = 0.6,
    channel: int = 1,
    min_area: int = 1,
) -> list[Detection]:
    """Detect bright blobs in one channel of a display-scale [0, 1] raster.

    Pixels whose ``channel`` value exceeds ``threshold`` are grouped into
    8-connected components. Each component with at least ``min_area``
    pixels yields its tight pixel box; confidence is the component's mean
    channel value. Pass ``img / 255`` for uint8 rasters.
    """
    plane = np.asarray(img, dtype=np.float64)[..., channel]
    labels, n = ndimage.label(plane > threshold, structure=_STRUCTURE)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    areas = ndimage.sum_labels(np.ones_like(plane), labels, idx)
    means = ndimage.mean(plane, labels, idx)
    dets = []
    for k, sl in enumerate(ndimage.find_objects(labels)):
        if areas[k] < min_area:
            continue
        ys, xs = sl
        box = BoundingBox(float(xs.start), float(ys.start), float(xs.stop), float(ys.stop))
        dets.append(Detection(box, float(np.clip(means[k], 0.0, 1.0))))
    return dets
