"""Command-line entry points: adapter-<name> --images <dir|list> --out <dir>
[--prompts <file>]. A model load failure writes a manifest-level error
record and exits non-zero."""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List

from .export import ModelLoadError, export_detections, export_ocr, export_openset
from .manifest import AdapterManifest

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


def _collect_images(spec: str) -> List[str]:
    if os.path.isdir(spec):
        return sorted(
            os.path.join(spec, name)
            for name in os.listdir(spec)
            if name.lower().endswith(IMAGE_EXTS)
        )
    return [p for p in spec.split(",") if p]


def _load_prompts(path: str) -> Dict[str, str]:
    prompts = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                doc = json.loads(line)
                prompts[doc["image_id"]] = doc["prompt"]
    return prompts


def _parser(name: str, default_model: str, with_prompts: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=name)
    p.add_argument("--images", required=True, help="image directory or comma-separated list")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", default=default_model)
    if with_prompts:
        p.add_argument("--prompts", required=True, help="JSONL of {image_id, prompt}")
    return p


def _run(adapter: str, fn, args) -> int:
    try:
        fn()
        return 0
    except ModelLoadError as e:
        os.makedirs(args.out, exist_ok=True)
        AdapterManifest(adapter=adapter, model_id=args.model, error=str(e)).write(args.out)
        print(f"error: {e}", file=sys.stderr)
        return 1


def main_contour(argv=None) -> int:
    args = _parser("adapter-contour", "contour", with_prompts=False).parse_args(argv)
    images = _collect_images(args.images)
    return _run("contour", lambda: export_detections(images, args.model, args.out), args)


def main_glyph_ocr(argv=None) -> int:
    args = _parser("adapter-glyph-ocr", "glyph", with_prompts=False).parse_args(argv)
    images = _collect_images(args.images)
    return _run("glyph-ocr", lambda: export_ocr(images, args.model, args.out), args)


def main_grounded_contour(argv=None) -> int:
    args = _parser("adapter-grounded-contour", "contour", with_prompts=True).parse_args(argv)
    images = _collect_images(args.images)
    prompts = _load_prompts(args.prompts)
    return _run(
        "grounded-contour",
        lambda: export_openset(images, prompts, args.model, args.out),
        args,
    )


if __name__ == "__main__":
    raise SystemExit(main_contour())
