"""Canonical detection/OCR domain types and geometry.

Boxes are stored center-form in normalized image coordinates (cx, cy, w, h),
so the first two values of a box are the object's center. Adapters that
produce corner-form pixel boxes convert via :func:`to_norm_box`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

from .errors import GeometryError

# Coordinates up to 1% outside [0,1] are treated as detector jitter and
# clamped; anything further is rejected as corrupt.
CLAMP_TOLERANCE = 0.01

Point = Tuple[float, float]


def _clamp_unit(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise GeometryError(f"{what} is not finite: {v!r}")
    if v < -CLAMP_TOLERANCE or v > 1.0 + CLAMP_TOLERANCE:
        raise GeometryError(f"{what} out of range beyond tolerance: {v!r}")
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class NormBox:
    """Center-form box in normalized coordinates, all components in [0,1]."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, _clamp_unit(getattr(self, name), name))


@dataclass(frozen=True)
class Detection:
    """One detected object: class label, canonical box, confidence."""

    label: str
    box: NormBox
    confidence: float

    def __post_init__(self):
        if not self.label:
            raise GeometryError("detection label must be non-empty")
        if any(ord(c) < 32 or ord(c) == 127 for c in self.label):
            raise GeometryError(f"detection label contains control characters: {self.label!r}")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise GeometryError(f"confidence out of [0,1]: {self.confidence!r}")


@dataclass(frozen=True)
class OcrSpan:
    """One recognized text span with its region geometry."""

    text: str
    region: Union[NormBox, Tuple[Point, ...]]
    confidence: float

    def __post_init__(self):
        if not self.text.strip():
            raise GeometryError("OCR text must be non-empty after trimming")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise GeometryError(f"confidence out of [0,1]: {self.confidence!r}")
        if not isinstance(self.region, NormBox):
            pts = tuple(
                (_clamp_unit(x, "vertex x"), _clamp_unit(y, "vertex y"))
                for x, y in self.region
            )
            if len(pts) < 3:
                raise GeometryError(f"polygon needs at least 3 vertices, got {len(pts)}")
            object.__setattr__(self, "region", pts)


@dataclass(frozen=True)
class Thresholds:
    """Confidence cutoffs for the detector families; items must score
    strictly higher than the cutoff to be retained."""

    od_conf: float = 0.3
    ocr_box: float = 0.6
    openset_box: float = 0.35
    openset_text: float = 0.25

    def __post_init__(self):
        for name in ("od_conf", "ocr_box", "openset_box", "openset_text"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise GeometryError(f"threshold {name} out of [0,1]: {v!r}")


def center_of(box_or_region) -> Point:
    """Center point of a NormBox (its cx, cy) or the vertex mean of a polygon."""
    if isinstance(box_or_region, NormBox):
        return (box_or_region.cx, box_or_region.cy)
    pts = list(box_or_region)
    if len(pts) < 3:
        raise GeometryError(f"polygon needs at least 3 vertices, got {len(pts)}")
    cx = sum(p[0] for p in pts) / len(pts)
    cy = sum(p[1] for p in pts) / len(pts)
    return (min(1.0, max(0.0, cx)), min(1.0, max(0.0, cy)))


def to_norm_box(raw: Sequence[float], image_w: float, image_h: float) -> NormBox:
    """Convert a corner-form pixel box [x1, y1, x2, y2] to a normalized
    center-form box. Boxes inverted or out of frame by more than 1% of the
    image dimension are rejected; smaller overshoot is clamped."""
    if image_w <= 0 or image_h <= 0:
        raise GeometryError(f"image dimensions must be positive, got {image_w}x{image_h}")
    if len(raw) != 4:
        raise GeometryError(f"corner box must have 4 values, got {len(raw)}")
    x1, y1, x2, y2 = (float(v) for v in raw)
    tol_x, tol_y = CLAMP_TOLERANCE * image_w, CLAMP_TOLERANCE * image_h
    if x1 - x2 > tol_x or y1 - y2 > tol_y:
        raise GeometryError(f"inverted box beyond tolerance: {raw!r}")
    if min(x1, x2) < -tol_x or max(x1, x2) > image_w + tol_x:
        raise GeometryError(f"box outside frame beyond tolerance: {raw!r}")
    if min(y1, y2) < -tol_y or max(y1, y2) > image_h + tol_y:
        raise GeometryError(f"box outside frame beyond tolerance: {raw!r}")
    x1, x2 = sorted((min(image_w, max(0.0, x1)), min(image_w, max(0.0, x2))))
    y1, y2 = sorted((min(image_h, max(0.0, y1)), min(image_h, max(0.0, y2))))
    return NormBox(
        cx=(x1 + x2) / (2.0 * image_w),
        cy=(y1 + y2) / (2.0 * image_h),
        w=(x2 - x1) / image_w,
        h=(y2 - y1) / image_h,
    )


def filter_by_confidence(items, cutoff: float):
    """Keep items whose confidence is strictly greater than the cutoff,
    preserving input order."""
    if not (0.0 <= cutoff <= 1.0):
        raise GeometryError(f"cutoff out of [0,1]: {cutoff!r}")
    return [item for item in items if item.confidence > cutoff]
