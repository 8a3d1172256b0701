"""Benchmark subset construction, answer normalization, scorers, and the
aggregate improvement metric.

Includes the unambiguous-subset filter for GQA-style sets (yes/no answers
plus "or"-choice questions), a generic exact-match scorer, the caption-vs-
foil counter scorer, and the mean-percentage-improvement aggregate over a
benchmark suite.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import EmptyInputError, ValidationError

_ARTICLES = {"a", "an", "the"}
_TERMINAL_PUNCT = ".,!?;:"
_STANDALONE_OR = re.compile(r"\bor\b", re.IGNORECASE)
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class BenchSample:
    sample_id: str
    image_ref: str
    question: str
    answer: str
    answer_type: str = "open"  # "binary" | "choice" | "open"

    def __post_init__(self):
        if self.answer_type not in ("binary", "choice", "open"):
            raise ValidationError(f"unknown answer_type {self.answer_type!r}")
        if self.answer_type == "binary" and normalize_answer(self.answer) not in ("yes", "no"):
            raise ValidationError(f"binary sample gold must be yes/no, got {self.answer!r}")


@dataclass(frozen=True)
class ValseInstance:
    """A caption that matches the image and a minimally modified foil that
    does not."""

    instance_id: str
    image_ref: str
    caption: str
    foil: str


@dataclass(frozen=True)
class ValseCounters:
    count: int
    capt_fits: int
    foil_detected: int
    foil_accuracy: int
    pairwise_acc: int

    def __post_init__(self):
        if not (0 <= self.capt_fits <= self.count and 0 <= self.foil_detected <= self.count):
            raise ValidationError("counters exceed instance count")
        if self.foil_accuracy != self.capt_fits + self.foil_detected:
            raise ValidationError("foil_accuracy must equal capt_fits + foil_detected")
        if self.pairwise_acc > min(self.capt_fits, self.foil_detected):
            raise ValidationError("pairwise_acc cannot exceed either clause count")


@dataclass(frozen=True)
class ValseScores:
    acc_r: float
    acc: float
    p_c: float
    p_f: float


@dataclass
class ScoreReport:
    """Per-benchmark metric values plus an optional aggregate improvement."""

    metrics: Dict[str, float] = field(default_factory=dict)
    delta: Optional[float] = None

    def to_dict(self) -> dict:
        doc = {"metrics": self.metrics}
        if self.delta is not None:
            doc["delta"] = self.delta
        return doc

    def format_table(self) -> str:
        width = max([len(k) for k in self.metrics] + [9])
        lines = [f"{'benchmark':<{width}}  {'value':>10}"]
        lines += [f"{k:<{width}}  {v:>10.2f}" for k, v in self.metrics.items()]
        if self.delta is not None:
            lines.append(f"{'delta':<{width}}  {self.delta:>+10.2f}")
        return "\n".join(lines)


def normalize_answer(s: str) -> str:
    """Lowercase, trim, strip terminal punctuation, collapse whitespace, and
    drop leading articles."""
    s = s.lower().strip()
    s = s.rstrip(_TERMINAL_PUNCT).strip()
    s = _WS.sub(" ", s)
    tokens = s.split(" ")
    while tokens and tokens[0] in _ARTICLES:
        tokens = tokens[1:]
    return " ".join(tokens)


def gqa_star_filter(samples: Sequence[BenchSample]) -> List[BenchSample]:
    """Keep samples whose gold answer is yes/no or whose question offers an
    explicit "or" choice; order-preserving and idempotent."""
    return [
        s
        for s in samples
        if normalize_answer(s.answer) in ("yes", "no") or _STANDALONE_OR.search(s.question)
    ]


def _first_token(s: str) -> str:
    parts = s.split(" ", 1)
    return parts[0].rstrip(_TERMINAL_PUNCT) if parts else ""


def score_exact(pairs: Iterable[Tuple[BenchSample, str]]) -> float:
    """Exact-match accuracy percentage over (sample, reply) pairs. Binary
    samples compare only the reply's first normalized token."""
    total = 0
    matches = 0
    for sample, reply in pairs:
        total += 1
        gold = normalize_answer(sample.answer)
        got = normalize_answer(reply)
        if sample.answer_type == "binary":
            got = _first_token(got)
        if got == gold:
            matches += 1
    if total == 0:
        raise EmptyInputError("no records to score")
    return 100.0 * matches / total


def parse_yes_no(reply: str) -> str:
    """Classify a free-form reply as "yes", "no", or "other"."""
    tok = _first_token(normalize_answer(reply))
    return tok if tok in ("yes", "no") else "other"


def tally_valse(replies: Sequence[Tuple[str, str]]) -> ValseCounters:
    """Fold (caption-reply, foil-reply) pairs into the four counters.

    A "yes" on the caption question and a "no" on the foil question each
    count toward overall accuracy; getting both right counts pairwise.
    Replies that are neither yes nor no are wrong for their clause.
    """
    capt_fits = foil_detected = pairwise = 0
    for r1, r2 in replies:
        a1, a2 = parse_yes_no(r1), parse_yes_no(r2)
        if a1 == "yes":
            capt_fits += 1
        if a2 == "no":
            foil_detected += 1
        if a1 == "yes" and a2 == "no":
            pairwise += 1
    return ValseCounters(
        count=len(replies),
        capt_fits=capt_fits,
        foil_detected=foil_detected,
        foil_accuracy=capt_fits + foil_detected,
        pairwise_acc=pairwise,
    )


def valse_score(replies: Sequence[Tuple[str, str]]) -> ValseScores:
    """Caption-vs-foil metrics from per-instance reply pairs."""
    if not replies:
        raise EmptyInputError("valse_score requires at least one instance")
    c = tally_valse(replies)
    return ValseScores(
        acc_r=c.pairwise_acc / c.count * 100.0,
        acc=c.foil_accuracy / c.count * 50.0,
        p_c=c.capt_fits / c.count * 100.0,
        p_f=c.foil_detected / c.count * 100.0,
    )


def build_valse_questions(inst: ValseInstance) -> Tuple[str, str]:
    """Yes/no probe questions for the caption and the foil; embedded single
    quotes are doubled, matching the OCR sentence convention."""
    if not inst.caption or not inst.foil:
        raise ValidationError("caption and foil must be non-empty")

    def q(sentence: str) -> str:
        escaped = sentence.replace("'", "''")
        return f"Does this image match the sentence '{escaped}'? Use only 'yes' or 'no' to answer."

    return q(inst.caption), q(inst.foil)


def delta(baseline: Mapping[str, float], candidate: Mapping[str, float]) -> float:
    """Mean percentage improvement of candidate over baseline across a
    benchmark suite (composite benchmarks such as MME enter as one summed
    value)."""
    if set(baseline) != set(candidate):
        raise ValidationError(
            f"benchmark key mismatch: {sorted(set(baseline) ^ set(candidate))}"
        )
    if not baseline:
        raise EmptyInputError("delta requires at least one benchmark")
    for k, v in baseline.items():
        if v <= 0:
            raise ValidationError(f"baseline value for {k!r} must be positive")
    return 100.0 / len(baseline) * sum(
        (candidate[k] - baseline[k]) / baseline[k] for k in baseline
    )
