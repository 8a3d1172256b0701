"""Shared test oracles and random-input generators.

Oracles here deliberately avoid the production code paths they check.
"""
from __future__ import annotations

import random
import string
from typing import List

from detinfuse.geometry import Detection, NormBox


def scan_tokens(s: str) -> int:
    """Independent token counter: walk characters, counting word-character
    runs and individual non-space punctuation characters."""
    count = 0
    in_word = False
    for c in s:
        if c.isalnum() or c == "_":
            if not in_word:
                count += 1
                in_word = True
        else:
            in_word = False
            if not c.isspace():
                count += 1
    return count


def ungrouped_box_sentence(detections) -> str:
    """Test-only verbose variant: every detection rendered separately with
    all four box values and no category grouping."""
    parts = [
        f"{d.label}:[{d.box.cx:.2f}, {d.box.cy:.2f}, {d.box.w:.2f}, {d.box.h:.2f}]"
        for d in detections
    ]
    return (
        "Here are the coordinates of certain objects in this image: "
        + ", ".join(parts)
        + "."
    )


LABELS = [
    "person", "cake", "dog", "cat", "bus", "car", "chair", "bench",
    "bottle", "sheep", "box", "child", "lamp", "tree", "bird", "cup",
]


def random_detections(rng: random.Random, n: int) -> List[Detection]:
    return [
        Detection(
            label=rng.choice(LABELS),
            box=NormBox(
                rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 0.5), rng.uniform(0, 0.5)
            ),
            confidence=rng.uniform(0, 1),
        )
        for _ in range(n)
    ]


def random_label(rng: random.Random) -> str:
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(3, 8)))
