"""Connected-component color/shape detector.

A self-contained closed-set detector: segments saturated colored regions,
labels each component as "<color> <shape>" (e.g. "red box", "blue circle"),
and scores it by how well the component fills its ideal shape. Small and
deterministic, which makes it the default backend where no external model
weights are available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

MIN_AREA_FRACTION = 0.0005  # ignore specks below 0.05% of the image

# hue centers (degrees) for the fixed color vocabulary
_COLORS = [
    ("red", 0.0),
    ("yellow", 60.0),
    ("green", 120.0),
    ("cyan", 180.0),
    ("blue", 240.0),
    ("magenta", 300.0),
]


@dataclass(frozen=True)
class RawDetection:
    label: str
    xyxy: Tuple[float, float, float, float]  # pixel corners
    confidence: float


def _color_name(hue_deg: float) -> str:
    best, best_dist = "red", 360.0
    for name, center in _COLORS:
        dist = min(abs(hue_deg - center), 360.0 - abs(hue_deg - center))
        if dist < best_dist:
            best, best_dist = name, dist
    return best


def detect(img: Image.Image) -> List[RawDetection]:
    hsv = np.asarray(img.convert("HSV"), dtype=np.float64)
    hue = hsv[..., 0] * (360.0 / 255.0)
    sat = hsv[..., 1] / 255.0
    val = hsv[..., 2] / 255.0
    mask = (sat > 0.4) & (val > 0.2)

    labeled, n = ndimage.label(mask)
    h, w = mask.shape
    min_area = MIN_AREA_FRACTION * w * h
    out: List[RawDetection] = []
    for idx, region in enumerate(ndimage.find_objects(labeled), start=1):
        if region is None:
            continue
        ys, xs = region
        component = labeled[region] == idx
        area = int(component.sum())
        if area < min_area:
            continue
        box_w = xs.stop - xs.start
        box_h = ys.stop - ys.start
        fill = area / (box_w * box_h)
        # an axis-aligned box fills its bbox (~1.0); an ellipse fills pi/4
        if fill > (1.0 + math.pi / 4) / 2:
            shape, ideal = "box", 1.0
        else:
            shape, ideal = "circle", math.pi / 4
        confidence = max(0.0, min(1.0, 1.0 - abs(fill - ideal) / ideal))
        mean_hue = float(hue[region][component].mean())
        out.append(
            RawDetection(
                label=f"{_color_name(mean_hue)} {shape}",
                xyxy=(float(xs.start), float(ys.start), float(xs.stop), float(ys.stop)),
                confidence=round(confidence, 6),
            )
        )
    out.sort(key=lambda d: (d.xyxy[1], d.xyxy[0]))
    return out
