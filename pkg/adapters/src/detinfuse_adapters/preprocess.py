"""Image preprocessing for the closed-set detection path.

Closed-set detection resizes aspect-preserving so the shortest side is at
least 224 px and the longest at most 2048 px. OCR runs on the native
resolution. Normalized output coordinates are unaffected by the resize;
the policy exists so detection backends see images in their working range.
"""
from __future__ import annotations

from PIL import Image

MIN_SHORT_SIDE = 224
MAX_LONG_SIDE = 2048

RESIZE_NOTE = (
    f"aspect-preserving resize, shortest side >= {MIN_SHORT_SIDE}, "
    f"longest side <= {MAX_LONG_SIDE}"
)


def resize_for_detection(img: Image.Image) -> Image.Image:
    w, h = img.size
    short, long = min(w, h), max(w, h)
    scale = 1.0
    if short < MIN_SHORT_SIDE:
        scale = MIN_SHORT_SIDE / short
    if long * scale > MAX_LONG_SIDE:
        scale = MAX_LONG_SIDE / long
    if scale == 1.0:
        return img
    return img.resize((max(1, round(w * scale)), max(1, round(h * scale))))
