"""Parsers for detection / OCR / open-set result files.

Two layouts are accepted: a single JSON document per image, and a corpus
stream of newline-delimited documents (one image per line). Unknown extra
fields are ignored with a warning so adapters for new detectors stay
forward-compatible.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple, Union

from .errors import ParseError, ValidationError
from .geometry import Detection, NormBox, OcrSpan, to_norm_box

logger = logging.getLogger(__name__)

_DET_FIELDS = {"image_id", "image_w", "image_h", "detections"}
_DET_ENTRY_FIELDS = {"label", "box", "box_format", "confidence"}
_OCR_FIELDS = {"image_id", "spans"}
_OCR_ENTRY_FIELDS = {"text", "region", "confidence"}
_OPENSET_FIELDS = {"image_id", "image_w", "image_h", "query", "matches"}
_OPENSET_ENTRY_FIELDS = {"phrase", "box", "box_format", "box_score", "text_score"}


@dataclass(frozen=True)
class DetectionFile:
    image_id: str
    detections: Tuple[Detection, ...]
    image_w: Optional[int] = None
    image_h: Optional[int] = None


@dataclass(frozen=True)
class OcrFile:
    image_id: str
    spans: Tuple[OcrSpan, ...]


@dataclass(frozen=True)
class OpensetMatch:
    phrase: str
    box: NormBox
    box_score: float
    text_score: float


@dataclass(frozen=True)
class OpensetFile:
    image_id: str
    query: str
    matches: Tuple[OpensetMatch, ...]


def _load_doc(data: Union[bytes, str]):
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def _warn_unknown(doc: dict, known: set, where: str) -> None:
    extra = set(doc) - known
    if extra:
        logger.warning("%s: ignoring unknown fields %s", where, sorted(extra))


def _require(doc: dict, name: str, where: str):
    if name not in doc:
        raise ValidationError(f"{where}.{name}: missing required field")
    return doc[name]


def _parse_box(entry: dict, image_w, image_h, where: str) -> NormBox:
    box = _require(entry, "box", where)
    fmt = entry.get("box_format", "cxcywh_norm")
    if not (isinstance(box, list) and len(box) == 4):
        raise ValidationError(f"{where}.box: expected 4 numbers, got {box!r}")
    try:
        if fmt == "cxcywh_norm":
            return NormBox(*(float(v) for v in box))
        if fmt == "xyxy_px":
            if not image_w or not image_h:
                raise ValidationError(
                    f"{where}.box_format: xyxy_px requires image_w and image_h"
                )
            return to_norm_box(box, image_w, image_h)
    except ValidationError:
        raise
    except Exception as e:
        raise ValidationError(f"{where}.box: {e}") from e
    raise ValidationError(f"{where}.box_format: unknown format {fmt!r}")


def parse_detection_file(data: Union[bytes, str, dict]) -> DetectionFile:
    """Parse one canonical detection document into validated domain values."""
    doc = data if isinstance(data, dict) else _load_doc(data)
    if not isinstance(doc, dict):
        raise ValidationError("document root must be an object")
    image_id = _require(doc, "image_id", "$")
    if not isinstance(image_id, str) or not image_id:
        raise ValidationError("$.image_id: must be a non-empty string")
    _warn_unknown(doc, _DET_FIELDS, f"detection file {image_id}")
    image_w, image_h = doc.get("image_w"), doc.get("image_h")
    entries = _require(doc, "detections", "$")
    if not isinstance(entries, list):
        raise ValidationError("$.detections: must be a list")
    detections = []
    for i, entry in enumerate(entries):
        where = f"$.detections[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: must be an object")
        _warn_unknown(entry, _DET_ENTRY_FIELDS, where)
        label = _require(entry, "label", where)
        conf = _require(entry, "confidence", where)
        box = _parse_box(entry, image_w, image_h, where)
        try:
            detections.append(Detection(label=label, box=box, confidence=float(conf)))
        except Exception as e:
            raise ValidationError(f"{where}: {e}") from e
    return DetectionFile(
        image_id=image_id,
        detections=tuple(detections),
        image_w=image_w,
        image_h=image_h,
    )


def _parse_region(region, where: str):
    if not isinstance(region, list) or len(region) < 3 and len(region) != 4:
        raise ValidationError(f"{where}.region: expected a polygon or 4-value box")
    if region and isinstance(region[0], list):
        pts = []
        for j, pt in enumerate(region):
            if not (isinstance(pt, list) and len(pt) == 2):
                raise ValidationError(f"{where}.region[{j}]: expected [x, y]")
            pts.append((float(pt[0]), float(pt[1])))
        return tuple(pts)
    if len(region) == 4:
        return NormBox(*(float(v) for v in region))
    raise ValidationError(f"{where}.region: expected a polygon or 4-value box")


def parse_ocr_file(data: Union[bytes, str, dict]) -> OcrFile:
    """Parse one canonical OCR document into validated domain values."""
    doc = data if isinstance(data, dict) else _load_doc(data)
    if not isinstance(doc, dict):
        raise ValidationError("document root must be an object")
    image_id = _require(doc, "image_id", "$")
    if not isinstance(image_id, str) or not image_id:
        raise ValidationError("$.image_id: must be a non-empty string")
    _warn_unknown(doc, _OCR_FIELDS, f"OCR file {image_id}")
    entries = _require(doc, "spans", "$")
    if not isinstance(entries, list):
        raise ValidationError("$.spans: must be a list")
    spans = []
    for i, entry in enumerate(entries):
        where = f"$.spans[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: must be an object")
        _warn_unknown(entry, _OCR_ENTRY_FIELDS, where)
        text = _require(entry, "text", where)
        conf = _require(entry, "confidence", where)
        region = _parse_region(_require(entry, "region", where), where)
        try:
            spans.append(OcrSpan(text=text, region=region, confidence=float(conf)))
        except Exception as e:
            raise ValidationError(f"{where}: {e}") from e
    return OcrFile(image_id=image_id, spans=tuple(spans))


def parse_openset_file(data: Union[bytes, str, dict]) -> OpensetFile:
    """Parse one open-set detector output document."""
    doc = data if isinstance(data, dict) else _load_doc(data)
    if not isinstance(doc, dict):
        raise ValidationError("document root must be an object")
    image_id = _require(doc, "image_id", "$")
    _warn_unknown(doc, _OPENSET_FIELDS, f"open-set file {image_id}")
    image_w, image_h = doc.get("image_w"), doc.get("image_h")
    entries = _require(doc, "matches", "$")
    if not isinstance(entries, list):
        raise ValidationError("$.matches: must be a list")
    matches = []
    for i, entry in enumerate(entries):
        where = f"$.matches[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: must be an object")
        _warn_unknown(entry, _OPENSET_ENTRY_FIELDS, where)
        phrase = _require(entry, "phrase", where)
        if not isinstance(phrase, str) or not phrase:
            raise ValidationError(f"{where}.phrase: must be a non-empty string")
        box = _parse_box(entry, image_w, image_h, where)
        try:
            matches.append(
                OpensetMatch(
                    phrase=phrase,
                    box=box,
                    box_score=float(_require(entry, "box_score", where)),
                    text_score=float(_require(entry, "text_score", where)),
                )
            )
        except ValidationError:
            raise
        except Exception as e:
            raise ValidationError(f"{where}: {e}") from e
    return OpensetFile(image_id=image_id, query=doc.get("query", ""), matches=tuple(matches))


def serialize_detection_file(f: DetectionFile) -> dict:
    """Render back to the canonical schema (always center-form normalized)."""
    doc = {"image_id": f.image_id}
    if f.image_w is not None:
        doc["image_w"] = f.image_w
    if f.image_h is not None:
        doc["image_h"] = f.image_h
    doc["detections"] = [
        {
            "label": d.label,
            "box": [d.box.cx, d.box.cy, d.box.w, d.box.h],
            "box_format": "cxcywh_norm",
            "confidence": d.confidence,
        }
        for d in f.detections
    ]
    return doc


def serialize_ocr_file(f: OcrFile) -> dict:
    doc = {"image_id": f.image_id, "spans": []}
    for s in f.spans:
        if isinstance(s.region, NormBox):
            region = [s.region.cx, s.region.cy, s.region.w, s.region.h]
        else:
            region = [[x, y] for x, y in s.region]
        doc["spans"].append({"text": s.text, "region": region, "confidence": s.confidence})
    return doc


def iter_stream(data: Union[bytes, str]) -> Iterator[dict]:
    """Yield documents from a newline-delimited corpus stream."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed JSON at stream line {lineno}: {e.msg}") from e


def parse_detection_stream(data: Union[bytes, str]) -> List[DetectionFile]:
    return [parse_detection_file(doc) for doc in iter_stream(data)]


def parse_ocr_stream(data: Union[bytes, str]) -> List[OcrFile]:
    return [parse_ocr_file(doc) for doc in iter_stream(data)]
