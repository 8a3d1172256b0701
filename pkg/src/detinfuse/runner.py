"""Batch inference driver.

Assembles infused prompts (detection text before the question, one user
message), sends them to a chat-completions endpoint or a deterministic mock
model, and persists results to an append-only newline-delimited run store.
Completed (sample_id, config_fingerprint) pairs are never re-sent, so an
interrupted batch can simply be re-run.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .errors import EndpointError, ValidationError
from .textgen import InfusionText, pluralize

TOKEN_ENV_VAR = "DETINFUSE_API_TOKEN"


@dataclass(frozen=True)
class PromptBundle:
    """Everything needed to ask one question about one image."""

    sample_id: str
    image_ref: str
    question: str
    mode: str = "infused"  # "infused" | "plain"
    od_text: Optional[InfusionText] = None
    ocr_text: Optional[InfusionText] = None

    def __post_init__(self):
        if self.mode not in ("infused", "plain"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == "plain" and (self.od_text or self.ocr_text):
            raise ValidationError("plain mode must not carry infusion texts")
        for t in (self.od_text, self.ocr_text):
            if t is not None and t.dropped:
                raise ValidationError("budget-dropped texts must not enter a bundle")


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings; temperature is pinned to 0 for reproducibility."""

    base_url: str = ""
    model: str = "mock"
    timeout: float = 60.0
    parallel: int = 1
    retries: int = 2
    consecutive_failure_limit: int = 5
    temperature: float = 0.0

    def __post_init__(self):
        if self.parallel < 1:
            raise ValidationError("parallelism must be >= 1")
        if self.temperature != 0.0:
            raise ValidationError("temperature is fixed at 0")


@dataclass(frozen=True)
class RunRecord:
    """One (sample, prompt, response) result row in the run store."""

    sample_id: str
    config_fingerprint: str
    prompt: str
    response: str
    latency_ms: float
    timestamp: float
    error: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample_id": self.sample_id,
                "config_fingerprint": self.config_fingerprint,
                "prompt": self.prompt,
                "response": self.response,
                "latency_ms": self.latency_ms,
                "timestamp": self.timestamp,
                "error": self.error,
            },
            ensure_ascii=False,
        )

    @staticmethod
    def from_json(line: str) -> "RunRecord":
        doc = json.loads(line)
        return RunRecord(
            sample_id=doc["sample_id"],
            config_fingerprint=doc["config_fingerprint"],
            prompt=doc["prompt"],
            response=doc["response"],
            latency_ms=doc["latency_ms"],
            timestamp=doc["timestamp"],
            error=doc.get("error"),
        )


def config_fingerprint(
    thresholds, mode: str, model: str, budget: int, templates: Sequence[str] = ()
) -> str:
    """Stable hash of everything that changes what a prompt looks like."""
    payload = json.dumps(
        {
            "thresholds": [
                thresholds.od_conf,
                thresholds.ocr_box,
                thresholds.openset_box,
                thresholds.openset_text,
            ],
            "mode": mode,
            "model": model,
            "budget": budget,
            "templates": list(templates),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def assemble_prompt(bundle: PromptBundle) -> str:
    """Detection sentences (if any) on their own lines, then the question."""
    parts = []
    for t in (bundle.od_text, bundle.ocr_text):
        if t is not None and t.sentence and not t.dropped:
            parts.append(t.sentence)
    parts.append(bundle.question)
    return "\n".join(parts)


class RunStore:
    """Append-only newline-delimited record store with a sidecar index.

    The sidecar (<path>.idx) lists completed "sample_id\\tfingerprint" pairs
    for fast resume; it is rebuilt from the main file if missing.
    """

    def __init__(self, path: str):
        self.path = path
        self.index_path = path + ".idx"
        self._lock = threading.Lock()

    def completed_keys(self) -> Set[Tuple[str, str]]:
        if os.path.exists(self.index_path):
            with open(self.index_path, encoding="utf-8") as f:
                return {
                    tuple(line.rstrip("\n").split("\t", 1))
                    for line in f
                    if "\t" in line
                }
        return {(r.sample_id, r.config_fingerprint) for r in self.records()}

    def records(self) -> List[RunRecord]:
        if not os.path.exists(self.path):
            return []
        with open(self.path, encoding="utf-8") as f:
            return [RunRecord.from_json(line) for line in f if line.strip()]

    def append(self, record: RunRecord) -> None:
        line = record.to_json()
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
            with open(self.index_path, "a", encoding="utf-8") as f:
                f.write(f"{record.sample_id}\t{record.config_fingerprint}\n")
                f.flush()


_OD_GROUP = re.compile(r"(\d+) ([^:{},]+):\{(.*?)\}")
_OCR_SPAN = re.compile(r"'((?:[^']|'')*)'\[")
_HOW_MANY = re.compile(r"how many (.+?)(?: are\b| is\b| in\b| on\b|\?|$)")
_IS_THERE = re.compile(r"is there (?:a |an )?(.+?)(?: in\b| on\b|\?|$)")
_TEXT_SAY = re.compile(r"what does the text\b.*\bsay")


def _parse_od_groups(sentence: str) -> Dict[str, int]:
    return {label.strip(): int(count) for count, label, _ in _OD_GROUP.findall(sentence)}


def mock_answer(bundle: PromptBundle) -> str:
    """Deterministic stand-in model: answers counting/existence questions by
    parsing the object sentence and text questions from the first OCR span.
    Without usable detection text it answers "no"."""
    if bundle.mode == "plain":
        return "no"
    q = bundle.question.lower()
    od = bundle.od_text.sentence if bundle.od_text else ""
    ocr = bundle.ocr_text.sentence if bundle.ocr_text else ""
    groups = _parse_od_groups(od)

    def names_label(label: str, wanted: str) -> bool:
        # rendered group labels are pluralized when count > 1
        return wanted.casefold() == label.casefold() or (
            pluralize(wanted, 2).casefold() == label.casefold()
        )

    m = _HOW_MANY.search(q)
    if m:
        wanted = m.group(1).strip()
        for label, count in groups.items():
            if names_label(label, wanted):
                return str(count)
        return "0"
    m = _IS_THERE.search(q)
    if m:
        wanted = m.group(1).strip()
        hit = any(names_label(label, wanted) for label in groups)
        return "yes" if hit else "no"
    if _TEXT_SAY.search(q):
        m = _OCR_SPAN.search(ocr)
        if m:
            return m.group(1).replace("''", "'")
    return "no"


class MockEndpoint:
    """In-process model for tests and dry runs; records peak concurrency and
    can be scripted to fail a given number of times per sample."""

    def __init__(self, fail_first: Optional[Dict[str, int]] = None):
        self._lock = threading.Lock()
        self._in_flight = 0
        self.peak_concurrency = 0
        self.requests_issued = 0
        self._fail_budget = dict(fail_first or {})

    def now(self) -> float:
        return 0.0

    def complete(self, bundle: PromptBundle, prompt: str) -> str:
        with self._lock:
            self._in_flight += 1
            self.requests_issued += 1
            self.peak_concurrency = max(self.peak_concurrency, self._in_flight)
            remaining = self._fail_budget.get(bundle.sample_id, 0)
            if remaining > 0:
                self._fail_budget[bundle.sample_id] = remaining - 1
        try:
            if remaining > 0:
                raise TransientEndpointFailure("scripted 5xx")
            return mock_answer(bundle)
        finally:
            with self._lock:
                self._in_flight -= 1


class TransientEndpointFailure(Exception):
    """Retryable failure (5xx, timeout, connection reset)."""


class ChatEndpoint:
    """Client for a chat-completions-compatible HTTP endpoint."""

    def __init__(self, config: EndpointConfig):
        import requests  # deferred so mock-only use needs no HTTP stack

        self._requests = requests
        self.config = config
        self._session = requests.Session()
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"

    def now(self) -> float:
        return time.time()

    def complete(self, bundle: PromptBundle, prompt: str) -> str:
        content = [{"type": "text", "text": prompt}]
        if bundle.image_ref:
            content.insert(0, {"type": "image_url", "image_url": {"url": bundle.image_ref}})
        body = {
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._session.post(url, json=body, timeout=self.config.timeout)
        except self._requests.RequestException as e:
            raise TransientEndpointFailure(str(e)) from e
        if resp.status_code >= 500:
            raise TransientEndpointFailure(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise ProtocolError(f"malformed reply: {e}") from e


class ProtocolError(Exception):
    """Reply did not match the chat-completions shape; recorded per sample."""


def run_batch(
    samples: Sequence[PromptBundle],
    endpoint,
    store: RunStore,
    config: EndpointConfig,
    fingerprint: str,
) -> List[RunRecord]:
    """Send every not-yet-completed sample exactly once and return records
    for all samples in input order.

    Per-sample transient failures are retried up to the configured budget and
    then recorded with an error class. The whole run aborts when the endpoint
    fails on too many consecutive samples.
    """
    done = store.completed_keys()
    existing = {
        (r.sample_id, r.config_fingerprint): r
        for r in store.records()
        if (r.sample_id, r.config_fingerprint) in done
    }
    todo = [s for s in samples if (s.sample_id, fingerprint) not in done]

    consecutive_failures = [0]
    failure_lock = threading.Lock()

    def one(bundle: PromptBundle) -> RunRecord:
        prompt = assemble_prompt(bundle)
        start = endpoint.now()
        last_error: Optional[str] = None
        for _ in range(config.retries + 1):
            try:
                response = endpoint.complete(bundle, prompt)
                with failure_lock:
                    consecutive_failures[0] = 0
                return RunRecord(
                    sample_id=bundle.sample_id,
                    config_fingerprint=fingerprint,
                    prompt=prompt,
                    response=response,
                    latency_ms=(endpoint.now() - start) * 1000.0,
                    timestamp=endpoint.now(),
                    error=None,
                )
            except ProtocolError as e:
                last_error = f"protocol-error: {e}"
                break
            except TransientEndpointFailure as e:
                last_error = f"transient-failure: {e}"
        with failure_lock:
            consecutive_failures[0] += 1
            if consecutive_failures[0] >= config.consecutive_failure_limit:
                raise EndpointError(
                    f"aborting after {consecutive_failures[0]} consecutive failures"
                )
        return RunRecord(
            sample_id=bundle.sample_id,
            config_fingerprint=fingerprint,
            prompt=prompt,
            response="",
            latency_ms=(endpoint.now() - start) * 1000.0,
            timestamp=endpoint.now(),
            error=last_error,
        )

    new_records: Dict[str, RunRecord] = {}
    if todo:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            for record in pool.map(one, todo):
                store.append(record)
                new_records[record.sample_id] = record

    out = []
    for s in samples:
        rec = new_records.get(s.sample_id) or existing.get((s.sample_id, fingerprint))
        if rec is not None:
            out.append(rec)
    return out
