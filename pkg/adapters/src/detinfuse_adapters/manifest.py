"""Adapter manifest: records which model produced an export batch and what
preprocessing was applied, so downstream consumers can audit provenance."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from typing import Optional

SCHEMA_VERSION = "1"


@dataclass
class AdapterManifest:
    adapter: str
    model_id: str
    schema_version: str = SCHEMA_VERSION
    preprocessing: str = ""
    error: Optional[str] = None

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2)
        return path
