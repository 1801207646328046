"""Entity spans, the range view of multi-source predictions, and greedy
conflict resolution between overlapping spans."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .conll import MissingLayerError, Sentence


@dataclass(frozen=True, order=True)
class EntitySpan:
    """Half-open token range [start, end) carrying one entity type."""

    start: int
    end: int
    etype: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span bounds [{self.start}, {self.end})")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class ScoredSpan:
    span: EntitySpan
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class RangeView:
    """Per-sentence span candidates and each source's label for them.

    ``ranges`` is the sorted union of (start, end) pairs predicted as an
    entity by at least one source. A source labels a range with its entity
    type only when it predicted exactly that span; otherwise O. Sources with
    no prediction layer on the sentence are absent from ``labels``.
    """

    ranges: tuple[tuple[int, int], ...]
    labels: dict[str, tuple[str, ...]]


def decode_spans(tags, *, strict: bool = True) -> list[EntitySpan]:
    """Turn a BIO tag sequence into disjoint spans sorted by start.

    With ``strict`` a scheme violation raises; otherwise orphan or
    mismatched I-X tags open a new span, matching the repair rule.
    """
    spans: list[EntitySpan] = []
    start = None
    etype = None
    for i, tag in enumerate(tags):
        if tag == "O":
            kind, new_type = "O", None
        elif tag.startswith("B-"):
            kind, new_type = "B", tag[2:]
        elif tag.startswith("I-"):
            kind, new_type = "I", tag[2:]
        else:
            raise ValueError(f"not a BIO tag: {tag!r}")

        if kind == "I" and etype == new_type and start is not None:
            continue
        if kind == "I":
            if strict:
                raise ValueError(f"invalid BIO at index {i}: {tag!r}")
            kind = "B"
        if start is not None:
            spans.append(EntitySpan(start, i, etype))
            start, etype = None, None
        if kind == "B":
            start, etype = i, new_type
    if start is not None:
        spans.append(EntitySpan(start, len(tags), etype))
    return spans


def encode_spans(spans, length: int) -> tuple[str, ...]:
    """Inverse of decode_spans; requires pairwise disjoint spans in bounds."""
    ordered = sorted(spans, key=lambda s: s.start)
    tags = ["O"] * length
    prev_end = 0
    for span in ordered:
        if span.end > length:
            raise ValueError(f"span {span} exceeds sentence length {length}")
        if span.start < prev_end:
            raise ValueError(f"overlapping spans at token {span.start}")
        tags[span.start] = f"B-{span.etype}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.etype}"
        prev_end = span.end
    return tuple(tags)


def build_range_view(sentence: Sentence) -> RangeView:
    """Project every source's span predictions onto the shared range set."""
    per_source: dict[str, dict[tuple[int, int], str]] = {}
    ranges: set[tuple[int, int]] = set()
    for src, tags in sentence.tags.items():
        spans = decode_spans(tags, strict=False)
        mapping = {(s.start, s.end): s.etype for s in spans}
        per_source[src] = mapping
        ranges.update(mapping)
    ordered = tuple(sorted(ranges))
    labels = {
        src: tuple(mapping.get(r, "O") for r in ordered)
        for src, mapping in per_source.items()
    }
    return RangeView(ranges=ordered, labels=labels)


def _sweep_key(item: ScoredSpan):
    s = item.span
    return (-item.score, s.start, -(s.end - s.start), s.etype)


def resolve_conflicts(spans) -> list[EntitySpan]:
    """Greedy sweep in descending score order, dropping overlapping spans.

    Ties break deterministically toward the earlier start, then the longer
    span, then the lexicographically smaller type, so repeated runs give
    identical output.
    """
    for item in spans:
        if not math.isfinite(item.score):
            raise ValueError(f"non-finite score on {item.span}")
    kept: list[EntitySpan] = []
    for item in sorted(spans, key=_sweep_key):
        if not any(item.span.overlaps(k) for k in kept):
            kept.append(item.span)
    kept.sort(key=lambda s: (s.start, s.end, s.etype))
    return kept


def spans_per_sentence(corpus, which: str) -> list[list[EntitySpan]]:
    """Decode one layer of a corpus to spans, sentence by sentence."""
    out = []
    for idx, sent in enumerate(corpus.sentences):
        layer = sent.layer(which)
        if layer is None:
            raise MissingLayerError(f"sentence {idx} has no {which!r} layer")
        out.append(decode_spans(layer, strict=False))
    return out
