"""Thin adapters that run small in-process detection/OCR models and export
their outputs in the detinfuse ingest schemas.

Adapters never threshold or format: confidences are passed through raw and
all sentence construction happens downstream. That keeps detectors
swappable without touching the pipeline.
"""

from .manifest import AdapterManifest, SCHEMA_VERSION

__all__ = ["AdapterManifest", "SCHEMA_VERSION"]
