"""Uniform-ensemble baselines: majority vote at token and entity
granularity, plus oracle selection of the single best source."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conll import Corpus, CorpusError, Sentence
from .metrics import Score, entity_f1
from .spans import (
    EntitySpan,
    ScoredSpan,
    build_range_view,
    decode_spans,
    resolve_conflicts,
)


@dataclass(frozen=True)
class VoteResult:
    winner: str
    counts: dict[str, int]
    tied: bool


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def mv_token(votes: Sequence[str], rng) -> VoteResult:
    """Modal label among the votes; ties break by a seeded uniform draw.

    ``rng`` is a seed or a generator. The draw happens only on an actual
    tie, so unanimous and strict-majority outcomes never consume randomness.
    """
    if not votes:
        raise ValueError("cannot vote on an empty ballot")
    counts = Counter(votes)
    top = max(counts.values())
    leaders = sorted(label for label, c in counts.items() if c == top)
    if len(leaders) == 1:
        return VoteResult(winner=leaders[0], counts=dict(counts), tied=False)
    winner = leaders[int(_as_rng(rng).integers(len(leaders)))]
    return VoteResult(winner=winner, counts=dict(counts), tied=True)


def _range_vote(votes: Sequence[str], rng) -> VoteResult:
    """Entity-granularity vote: on a tie between O and entity types, the
    entity side wins before any random draw.

    An O vote at range level only records that a source did not assert the
    span, which is weaker evidence than an explicit entity prediction; this
    also makes range aggregation deterministic on the classic one-entity
    disagreement pattern.
    """
    if not votes:
        raise ValueError("cannot vote on an empty ballot")
    counts = Counter(votes)
    top = max(counts.values())
    leaders = sorted(label for label, c in counts.items() if c == top)
    tied = len(leaders) > 1
    if tied and "O" in leaders:
        leaders = [lab for lab in leaders if lab != "O"]
    if len(leaders) == 1:
        return VoteResult(winner=leaders[0], counts=dict(counts), tied=tied)
    winner = leaders[int(_as_rng(rng).integers(len(leaders)))]
    return VoteResult(winner=winner, counts=dict(counts), tied=True)


def mv_token_rows(corpus: Corpus, seed: int) -> list[list[str]]:
    """Raw per-token majority labels for a whole corpus.

    Each sentence draws its tie randomness from a sub-seed keyed by the
    sentence index, consumed in token order, so results do not depend on
    evaluation order or parallelism. Rows may violate the BIO scheme; use
    the repair rule before emitting them.
    """
    rows = []
    for s_idx, sent in enumerate(corpus.sentences):
        rng = np.random.default_rng([seed, s_idx])
        row = []
        for t_idx in range(len(sent)):
            votes = [tags[t_idx] for tags in sent.tags.values()]
            if not votes:
                row.append("O")
                continue
            row.append(mv_token(votes, rng).winner)
        rows.append(row)
    return rows


def mv_entity(sentence: Sentence, rng) -> list[EntitySpan]:
    """Entity-level majority vote over the sentence's range view.

    Ranges whose winner is an entity type become scored spans (score = vote
    fraction) and overlaps are resolved greedily.
    """
    rng = _as_rng(rng)
    view = build_range_view(sentence)
    scored = []
    for r_idx, (start, end) in enumerate(view.ranges):
        votes = [labels[r_idx] for labels in view.labels.values()]
        result = _range_vote(votes, rng)
        if result.winner == "O":
            continue
        fraction = result.counts[result.winner] / len(votes)
        scored.append(ScoredSpan(EntitySpan(start, end, result.winner), fraction))
    return resolve_conflicts(scored)


def oracle_select(corpus: Corpus) -> tuple[str, Score]:
    """The source with the best entity F1 against gold (requires gold).

    Ties go to the lexicographically smallest source id.
    """
    if any(sent.gold is None for sent in corpus.sentences):
        raise CorpusError("oracle selection requires a gold layer on every sentence")
    gold = [decode_spans(sent.gold, strict=False) for sent in corpus.sentences]
    best: tuple[str, Score] | None = None
    for src in sorted(corpus.source_ids):
        pred = [
            decode_spans(sent.tags[src], strict=False) if src in sent.tags else []
            for sent in corpus.sentences
        ]
        score = entity_f1(pred, gold)
        if best is None or score.f1 > best[1].f1:
            best = (src, score)
    assert best is not None
    return best
