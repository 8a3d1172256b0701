"""Open-set detection workflow: turn a user question into a detector
phrase-prompt, and turn the detector's matches back into standard detections.

Target phrases are the question's content words after stopword removal,
with adjacent survivors merged ("red backpack"). The prompt joins phrases
with " . ", the phrase-separator convention of open-set grounding detectors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import FrozenSet, List, Sequence, Tuple

from .errors import EmptyInputError, ValidationError
from .geometry import Detection, Thresholds
from .ingest import OpensetMatch

# Question words, auxiliaries, prepositions, articles, pronouns, and other
# function words that never name a detection target.
STOPWORDS: FrozenSet[str] = frozenset(
    """
    a an the this that these those some any each every either neither no
    what which where when why how who whom whose whether
    is are was were be been being am do does did done doing
    can could will would shall should may might must ought
    have has had having get gets got gotten
    i you he she it we they me him her us them my your his its our their
    mine yours hers ours theirs myself yourself himself herself itself
    ourselves themselves
    in on at of to from by with without within into onto upon about above
    below under over between among through during before after behind
    beside besides near next against along across around past toward
    towards off out up down inside outside underneath beneath atop amid
    and or but nor so yet for if then than as because since while until
    unless although though however moreover also too very really quite
    just only even still again once twice
    there here now today currently present
    not never always often sometimes usually
    many much few little more most less least several
    one two three four five six seven eight nine ten
    first second third last other another same different
    please tell show describe say answer question
    kind type sort number amount count color colour
    left right front back top bottom middle side
    visible shown seen appear appears appearing located
    yes maybe perhaps
    am pm etc
    """.split()
)

_TOKEN_SPLIT = re.compile(r"\W+")


@dataclass(frozen=True)
class TargetList:
    """Ordered, de-duplicated candidate object-name phrases."""

    names: Tuple[str, ...]

    def __post_init__(self):
        seen = set()
        for name in self.names:
            if not name:
                raise ValidationError("target phrases must be non-empty")
            folded = name.casefold()
            if folded in seen:
                raise ValidationError(f"duplicate target phrase {name!r}")
            seen.add(folded)

    def __bool__(self) -> bool:
        return bool(self.names)


@dataclass(frozen=True)
class OpensetQuery:
    """A phrase-prompt for an open-set detector plus its score cutoffs."""

    prompt: str
    box_cutoff: float = 0.35
    text_cutoff: float = 0.25

    def __post_init__(self):
        if not (0.0 <= self.box_cutoff <= 1.0 and 0.0 <= self.text_cutoff <= 1.0):
            raise ValidationError("open-set cutoffs must be in [0,1]")


def extract_targets(question: str, stopwords: FrozenSet[str] = STOPWORDS) -> TargetList:
    """Candidate target phrases from a question: lowercase, split on
    non-word characters, drop stopwords, merge adjacent survivors, dedupe."""
    if not question:
        raise EmptyInputError("question must be non-empty")
    tokens = [t for t in _TOKEN_SPLIT.split(question.lower()) if t]
    phrases: List[str] = []
    current: List[str] = []
    for tok in tokens:
        if tok in stopwords:
            if current:
                phrases.append(" ".join(current))
                current = []
        else:
            current.append(tok)
    if current:
        phrases.append(" ".join(current))
    seen = set()
    unique = []
    for p in phrases:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    return TargetList(names=tuple(unique))


def build_openset_prompt(targets: TargetList, thresholds: Thresholds = Thresholds()) -> OpensetQuery:
    """Join target phrases into the detector prompt, e.g. "red backpack . bench ."."""
    if not targets:
        raise EmptyInputError("cannot build a prompt from an empty target list")
    prompt = " . ".join(name.lower() for name in targets.names) + " ."
    return OpensetQuery(
        prompt=prompt,
        box_cutoff=thresholds.openset_box,
        text_cutoff=thresholds.openset_text,
    )


def openset_to_detections(matches: Sequence[OpensetMatch], q: OpensetQuery) -> List[Detection]:
    """Keep matches that clear both the box and text cutoffs (strict >) and
    map them to standard detections; the box score becomes the confidence."""
    return [
        Detection(label=m.phrase, box=m.box, confidence=m.box_score)
        for m in matches
        if m.box_score > q.box_cutoff and m.text_score > q.text_cutoff
    ]
