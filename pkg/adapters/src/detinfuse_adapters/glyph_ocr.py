"""Template-matching OCR for machine-rendered uppercase text.

Recognizes A-Z and 0-9 rendered with PIL's default bitmap font: binarize,
split ink rows into lines, split lines into character columns, and match
each character cell against the rendered glyph templates by pixel
agreement. Deterministic and dependency-light; confidence is the matched
pixel fraction of the best template.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

GLYPHS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
INK_THRESHOLD = 128


@dataclass(frozen=True)
class RawSpan:
    text: str
    quad: Tuple[Tuple[float, float], ...]  # pixel vertices, clockwise
    confidence: float


@lru_cache(maxsize=1)
def font() -> ImageFont.ImageFont:
    """The fixed-pitch bitmap font this recognizer is trained on."""
    loader = getattr(ImageFont, "load_default_imagefont", ImageFont.load_default)
    return loader()


@lru_cache(maxsize=1)
def _pitch() -> int:
    """Advance width of the fixed-pitch font."""
    draw = ImageDraw.Draw(Image.new("L", (1, 1)))
    return max(1, round(draw.textlength("MM", font=font()) - draw.textlength("M", font=font())))


@lru_cache(maxsize=1)
def _templates() -> Dict[str, np.ndarray]:
    out = {}
    for ch in GLYPHS:
        img = Image.new("L", (24, 24), 255)
        ImageDraw.Draw(img).text((2, 2), ch, font=font(), fill=0)
        arr = np.asarray(img) < INK_THRESHOLD
        ys, xs = np.nonzero(arr)
        out[ch] = arr[ys.min(): ys.max() + 1, xs.min(): xs.max() + 1]
    return out


def _match_glyph(cell: np.ndarray) -> Tuple[str, float]:
    """Best template by pixel agreement, tolerating +/-1 px misalignment."""
    best_ch, best_score = "?", 0.0
    for ch, tpl in _templates().items():
        h = max(cell.shape[0], tpl.shape[0]) + 2
        w = max(cell.shape[1], tpl.shape[1]) + 2
        b = np.zeros((h, w), dtype=bool)
        b[1: 1 + tpl.shape[0], 1: 1 + tpl.shape[1]] = tpl
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                if dy + cell.shape[0] > h or dx + cell.shape[1] > w:
                    continue
                a = np.zeros((h, w), dtype=bool)
                a[dy: dy + cell.shape[0], dx: dx + cell.shape[1]] = cell
                score = (a == b).mean()
                if score > best_score:
                    best_ch, best_score = ch, score
    return best_ch, best_score


def _segments(profile: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) runs of True in a 1-D ink profile."""
    runs = []
    start = None
    for i, v in enumerate(profile):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(profile)))
    return runs


def recognize(img: Image.Image) -> List[RawSpan]:
    ink = np.asarray(img.convert("L")) < INK_THRESHOLD
    spans: List[RawSpan] = []
    pitch = _pitch()
    for y0, y1 in _segments(ink.any(axis=1)):
        line = ink[y0:y1]
        runs = _segments(line.any(axis=0))
        if not runs:
            continue
        # group ink runs into words: intra-word gaps are 1-2 px, a space
        # leaves at least half a cell blank
        word_runs: List[List[Tuple[int, int]]] = [[runs[0]]]
        for prev, cur in zip(runs, runs[1:]):
            if cur[0] - prev[1] >= pitch // 2:
                word_runs.append([cur])
            else:
                word_runs[-1].append(cur)
        for word_group in word_runs:
            # fixed-pitch font: carve every run into pitch-wide glyph cells
            word: List[Tuple[int, int]] = []
            for r0, r1 in word_group:
                n = max(1, round((r1 - r0) / pitch))
                for k in range(n):
                    word.append((r0 + k * pitch, min(r0 + (k + 1) * pitch, r1)))
            chars = []
            scores = []
            for x0, x1 in word:
                cell = line[:, x0:x1]
                ys = np.nonzero(cell.any(axis=1))[0]
                xs = np.nonzero(cell.any(axis=0))[0]
                cell = cell[ys.min(): ys.max() + 1, xs.min(): xs.max() + 1]
                ch, score = _match_glyph(cell)
                chars.append(ch)
                scores.append(score)
            x0, x1 = word[0][0], word[-1][1]
            spans.append(
                RawSpan(
                    text="".join(chars),
                    quad=(
                        (float(x0), float(y0)),
                        (float(x1), float(y0)),
                        (float(x1), float(y1)),
                        (float(x0), float(y1)),
                    ),
                    confidence=round(float(np.mean(scores)), 6),
                )
            )
    return spans
