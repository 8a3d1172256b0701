"""Render detections and OCR spans as compact instruction-prefixed sentences.

The object sentence groups detections by category and keeps only center
coordinates, e.g.::

    Here are the central coordinates of certain objects in this image:
    2 people:{[0.25, 0.12], [0.11, 0.43]}, 1 cake:{[0.42, 0.32]}.

The OCR sentence lists recognized strings with their centers in reading
order. Sentences longer than the token budget (default 1024) are dropped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, EmptyInputError
from .geometry import Detection, OcrSpan, Thresholds, center_of, filter_by_confidence

OD_HEADER = "Here are the central coordinates of certain objects in this image: "
OCR_HEADER = "Here are the central coordinates of certain texts in this image: "
DEFAULT_BUDGET = 1024

_WORD_RUN = re.compile(r"\w+")

IRREGULAR_PLURALS = {
    "person": "people",
    "child": "children",
    "man": "men",
    "woman": "women",
    "foot": "feet",
    "tooth": "teeth",
    "mouse": "mice",
    "sheep": "sheep",
}


@dataclass(frozen=True)
class TokenizerSpec:
    """How to measure sentence length: the built-in character-class scanner
    ("approx") or an external subword vocabulary file ("external")."""

    mode: str = "approx"
    vocab_path: Optional[str] = None


@dataclass(frozen=True)
class InfusionText:
    """A rendered detection sentence plus its measured token length."""

    modality: str  # "od" | "ocr"
    sentence: str
    token_len: int
    dropped: bool = False


@dataclass(frozen=True)
class LengthStats:
    """Corpus token-length statistics; `frac_over(k)` is the fraction of
    samples strictly longer than k."""

    mean_len: float
    mean_len_nonzero: float
    has_nonzero: bool
    _sorted_lengths: Tuple[int, ...]

    def frac_over(self, k: int) -> float:
        n = sum(1 for v in self._sorted_lengths if v > k)
        return n / len(self._sorted_lengths)


def format_coord(v: float) -> str:
    """Two fraction digits, round-half-even: 0.25 -> "0.25", 1.0 -> "1.00"."""
    return f"{v:.2f}"


def pluralize(label: str, count: int) -> str:
    """Pluralize a category label when it names more than one object."""
    if count == 1:
        return label
    irregular = IRREGULAR_PLURALS.get(label)
    if irregular is not None:
        return irregular
    if len(label) > 1 and label.endswith("y") and label[-2].lower() not in "aeiou":
        return label[:-1] + "ies"
    if label.endswith(("s", "x", "z", "ch", "sh")):
        return label + "es"
    return label + "s"


def _coord_str(cx: float, cy: float) -> str:
    return f"[{format_coord(cx)}, {format_coord(cy)}]"


def token_len(s: str, spec: TokenizerSpec = TokenizerSpec()) -> int:
    """Token count of a sentence under the configured tokenizer.

    Approx mode counts maximal runs of word characters plus every non-space
    punctuation character; it is deterministic and locale-independent.
    """
    if spec.mode == "approx":
        words = len(_WORD_RUN.findall(s))
        punct = sum(1 for c in s if not c.isspace() and not _WORD_RUN.fullmatch(c))
        return words + punct
    if spec.mode == "external":
        vocab = _load_vocab(spec)
        return _subword_count(s, vocab)
    raise ConfigError(f"unknown tokenizer mode {spec.mode!r}")


_VOCAB_CACHE: Dict[str, frozenset] = {}


def _load_vocab(spec: TokenizerSpec) -> frozenset:
    if not spec.vocab_path:
        raise ConfigError("external tokenizer requires a vocabulary path")
    cached = _VOCAB_CACHE.get(spec.vocab_path)
    if cached is not None:
        return cached
    try:
        with open(spec.vocab_path, encoding="utf-8") as f:
            vocab = frozenset(line.rstrip("\n") for line in f if line.rstrip("\n"))
    except OSError as e:
        raise ConfigError(f"cannot read vocabulary {spec.vocab_path}: {e}") from e
    _VOCAB_CACHE[spec.vocab_path] = vocab
    return vocab


def _subword_count(s: str, vocab: frozenset) -> int:
    # Greedy longest-match segmentation; characters absent from the
    # vocabulary count as one token each.
    count, i, n = 0, 0, len(s)
    max_piece = max((len(p) for p in vocab), default=1)
    while i < n:
        for j in range(min(n, i + max_piece), i, -1):
            if s[i:j] in vocab:
                count += 1
                i = j
                break
        else:
            count += 1
            i += 1
    return count


def build_od_sentence(
    detections: Sequence[Detection],
    thresholds: Thresholds = Thresholds(),
    tokenizer: TokenizerSpec = TokenizerSpec(),
) -> InfusionText:
    """Group confident detections by category and render the object sentence.

    Groups are ordered by descending count, ties broken by first occurrence;
    coordinates within a group keep input order. No retained detections
    yields an empty sentence.
    """
    retained = filter_by_confidence(detections, thresholds.od_conf)
    if not retained:
        return InfusionText(modality="od", sentence="", token_len=0)
    groups: Dict[str, List[Detection]] = {}
    for d in retained:
        groups.setdefault(d.label, []).append(d)
    ordered = sorted(groups.items(), key=lambda kv: -len(kv[1]))
    parts = []
    for label, members in ordered:
        coords = ", ".join(_coord_str(d.box.cx, d.box.cy) for d in members)
        parts.append(f"{len(members)} {pluralize(label, len(members))}:{{{coords}}}")
    sentence = OD_HEADER + ", ".join(parts) + "."
    return InfusionText(modality="od", sentence=sentence, token_len=token_len(sentence, tokenizer))


def _escape_quotes(text: str) -> str:
    return text.replace("'", "''")


def build_ocr_sentence(
    spans: Sequence[OcrSpan],
    thresholds: Thresholds = Thresholds(),
    tokenizer: TokenizerSpec = TokenizerSpec(),
) -> InfusionText:
    """Render confident OCR spans in reading order as the text sentence.

    Each entry is the recognized string in single quotes (embedded quotes
    doubled) followed by its center coordinates.
    """
    retained = filter_by_confidence(spans, thresholds.ocr_box)
    if not retained:
        return InfusionText(modality="ocr", sentence="", token_len=0)
    parts = []
    for s in retained:
        cx, cy = center_of(s.region)
        parts.append(f"'{_escape_quotes(s.text)}'{_coord_str(cx, cy)}")
    sentence = OCR_HEADER + ", ".join(parts) + "."
    return InfusionText(modality="ocr", sentence=sentence, token_len=token_len(sentence, tokenizer))


def apply_budget(t: InfusionText, budget: int = DEFAULT_BUDGET) -> InfusionText:
    """Drop a sentence whose token length exceeds the budget."""
    if t.token_len > budget:
        return replace(t, sentence="", dropped=True)
    return t


def corpus_stats(lengths: Sequence[int]) -> LengthStats:
    """Mean length, mean excluding zeros, and exceedance fractions for a
    corpus of per-sample token lengths."""
    if not lengths:
        raise EmptyInputError("corpus_stats requires at least one length")
    nonzero = [v for v in lengths if v > 0]
    return LengthStats(
        mean_len=sum(lengths) / len(lengths),
        mean_len_nonzero=(sum(nonzero) / len(nonzero)) if nonzero else 0.0,
        has_nonzero=bool(nonzero),
        _sorted_lengths=tuple(sorted(lengths)),
    )
