"""Exporters: run a backend over images and write one schema file per image
plus an adapter manifest."""
from __future__ import annotations

import json
import os
from typing import Dict, Iterable, List

from PIL import Image

from . import contour, glyph_ocr
from .manifest import AdapterManifest
from .preprocess import RESIZE_NOTE, resize_for_detection


class ModelLoadError(Exception):
    """The requested model backend cannot be loaded."""


def _image_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _round6(v: float) -> float:
    return round(v, 6)


def _write(out_dir: str, name: str, doc: dict) -> None:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)


def _check_model(model_id: str, supported: str) -> None:
    if model_id != supported:
        raise ModelLoadError(
            f"model {model_id!r} is not available in this environment "
            f"(supported: {supported!r})"
        )


def export_detections(image_paths: Iterable[str], model_id: str, out_dir: str) -> AdapterManifest:
    """Detect objects in each image and write canonical detection files.

    Confidences are passed through unfiltered; thresholding happens in the
    consuming pipeline.
    """
    _check_model(model_id, "contour")
    os.makedirs(out_dir, exist_ok=True)
    for path in image_paths:
        img = Image.open(path)
        resized = resize_for_detection(img)
        w, h = resized.size
        detections = []
        for d in contour.detect(resized):
            x1, y1, x2, y2 = d.xyxy
            detections.append(
                {
                    "label": d.label,
                    "box": [
                        _round6((x1 + x2) / (2 * w)),
                        _round6((y1 + y2) / (2 * h)),
                        _round6((x2 - x1) / w),
                        _round6((y2 - y1) / h),
                    ],
                    "box_format": "cxcywh_norm",
                    "confidence": d.confidence,
                }
            )
        _write(
            out_dir,
            f"{_image_id(path)}.det.json",
            {
                "image_id": _image_id(path),
                "image_w": img.size[0],
                "image_h": img.size[1],
                "detections": detections,
            },
        )
    manifest = AdapterManifest(adapter="contour", model_id=model_id, preprocessing=RESIZE_NOTE)
    manifest.write(out_dir)
    return manifest


def export_ocr(image_paths: Iterable[str], model_id: str, out_dir: str) -> AdapterManifest:
    """Recognize text in each image at native resolution and write canonical
    OCR files with normalized quadrilaterals."""
    _check_model(model_id, "glyph")
    os.makedirs(out_dir, exist_ok=True)
    for path in image_paths:
        img = Image.open(path)
        w, h = img.size
        spans = [
            {
                "text": s.text,
                "region": [[_round6(x / w), _round6(y / h)] for x, y in s.quad],
                "confidence": s.confidence,
            }
            for s in glyph_ocr.recognize(img)
        ]
        _write(out_dir, f"{_image_id(path)}.ocr.json", {"image_id": _image_id(path), "spans": spans})
    manifest = AdapterManifest(
        adapter="glyph-ocr", model_id=model_id, preprocessing="native resolution"
    )
    manifest.write(out_dir)
    return manifest


def _token_overlap(a: str, b: str) -> float:
    ta, tb = set(a.lower().split()), set(b.lower().split())
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def export_openset(
    image_paths: Iterable[str], prompts: Dict[str, str], model_id: str, out_dir: str
) -> AdapterManifest:
    """Phrase-grounded detection: run the detector and align each box with
    the best-overlapping prompt phrase, emitting both scores per match."""
    _check_model(model_id, "contour")
    os.makedirs(out_dir, exist_ok=True)
    for path in image_paths:
        image_id = _image_id(path)
        prompt = prompts.get(image_id, "")
        phrases = [p for p in (s.strip(" .") for s in prompt.split(" . ")) if p]
        img = resize_for_detection(Image.open(path))
        w, h = img.size
        matches: List[dict] = []
        for d in contour.detect(img):
            if not phrases:
                break
            scored = sorted(phrases, key=lambda p: _token_overlap(d.label, p), reverse=True)
            phrase = scored[0]
            x1, y1, x2, y2 = d.xyxy
            matches.append(
                {
                    "phrase": phrase,
                    "box": [
                        _round6((x1 + x2) / (2 * w)),
                        _round6((y1 + y2) / (2 * h)),
                        _round6((x2 - x1) / w),
                        _round6((y2 - y1) / h),
                    ],
                    "box_format": "cxcywh_norm",
                    "box_score": d.confidence,
                    "text_score": _round6(_token_overlap(d.label, phrase)),
                }
            )
        _write(
            out_dir,
            f"{image_id}.openset.json",
            {"image_id": image_id, "query": prompt, "matches": matches},
        )
    manifest = AdapterManifest(
        adapter="grounded-contour", model_id=model_id, preprocessing=RESIZE_NOTE
    )
    manifest.write(out_dir)
    return manifest
