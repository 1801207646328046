"""Few-shot consensus by ranking and retraining.

Sources are scored by entity F1 on a small gold set, truncated to the top k,
and normalized into mixture weights. A student tagger is then trained on the
corpus where each mini-batch takes its supervision from one source drawn
with probability proportional to its weight, and finally fine-tuned for a
fixed number of epochs on the gold set (no development set, no early
stopping; the gold data is scarce by assumption).

The tagger is a behavioral port so a neural model can be plugged in. The
shipped memo tagger memorizes per-token label counts, which keeps the whole
pipeline runnable and exactly checkable without ML dependencies.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .conll import Corpus, CorpusError, LabelSet, MissingLayerError, repair_bio
from .metrics import entity_f1
from .spans import decode_spans

DEFAULT_FINETUNE_EPOCHS = 5
DEFAULT_DISTILL_EPOCHS = 5
DEFAULT_BATCH_SIZE = 32

Example = tuple[Sequence[str], Sequence[str]]


@dataclass(frozen=True)
class SourceWeights:
    """Scores, truncation rank, and the resulting mixture weights."""

    source_ids: tuple[str, ...]
    s: np.ndarray
    k: int
    omega: np.ndarray

    def as_dict(self) -> dict:
        return {
            "sources": list(self.source_ids),
            "s": [float(x) for x in self.s],
            "k": self.k,
            "omega": [float(x) for x in self.omega],
        }


@dataclass(frozen=True)
class Schedule:
    """Which source supervises each mini-batch, in consumption order."""

    assignments: tuple[str, ...]
    seed: int
    batch_size: int


class TaggerPort(Protocol):
    """Minimal behavioral contract for a trainable sequence tagger."""

    def train(self, examples: Sequence[Example]) -> None: ...

    def predict(self, tokens: Sequence[str]) -> list[str]: ...

    def fine_tune(self, examples: Sequence[Example], epochs: int) -> None: ...


class MemoTagger:
    """Count-based tagger: each token string predicts its modal label.

    Training adds one count per (token, tag) occurrence; fine-tuning adds
    one count per epoch, so five epochs of gold outweigh up to five silver
    sightings. Unknown tokens predict O and output is repaired to valid BIO.
    Count ties resolve to the lexicographically smaller tag.
    """

    def __init__(self, label_set: LabelSet):
        self.label_set = label_set
        self.counts: dict[str, Counter] = {}

    def train(self, examples: Sequence[Example]) -> None:
        for tokens, tags in examples:
            for token, tag in zip(tokens, tags):
                self.counts.setdefault(token, Counter())[tag] += 1

    def fine_tune(self, examples: Sequence[Example], epochs: int) -> None:
        for _ in range(epochs):
            self.train(examples)

    def predict(self, tokens: Sequence[str]) -> list[str]:
        raw = []
        for token in tokens:
            seen = self.counts.get(token)
            if not seen:
                raw.append("O")
                continue
            top = max(seen.values())
            raw.append(min(tag for tag, c in seen.items() if c == top))
        return list(repair_bio(raw, self.label_set))

    def to_dict(self) -> dict:
        return {
            "kind": "memo",
            "entity_types": list(self.label_set.entity_types),
            "counts": {tok: dict(ctr) for tok, ctr in sorted(self.counts.items())},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MemoTagger":
        if payload.get("kind") != "memo":
            raise ValueError(f"not a memo tagger payload: {payload.get('kind')!r}")
        tagger = cls(LabelSet(tuple(payload["entity_types"])))
        tagger.counts = {tok: Counter(ctr) for tok, ctr in payload["counts"].items()}
        return tagger


def memo_tagger(label_set: LabelSet) -> MemoTagger:
    return MemoTagger(label_set)


def rank_sources(corpus: Corpus) -> np.ndarray:
    """Entity F1 of every source against gold, aligned with source_ids."""
    if any(sent.gold is None for sent in corpus.sentences):
        raise CorpusError("ranking requires a gold layer on every sentence")
    gold = [decode_spans(sent.gold, strict=False) for sent in corpus.sentences]
    scores = np.zeros(len(corpus.source_ids))
    for j, src in enumerate(corpus.source_ids):
        pred = [
            decode_spans(sent.tags[src], strict=False) if src in sent.tags else []
            for sent in corpus.sentences
        ]
        scores[j] = entity_f1(pred, gold).f1
    return scores


def truncate_normalize(
    s: np.ndarray, k: int, source_ids: Sequence[str] | None = None
) -> SourceWeights:
    """Zero all but the k best scores and renormalize the rest to sum to 1.

    Ties at the cut rank keep the earlier source. Raises when nothing
    useful survives (all retained scores zero).
    """
    s = np.asarray(s, dtype=np.float64)
    h = s.shape[0]
    ids = tuple(source_ids) if source_ids is not None else tuple(
        f"src{j + 1}" for j in range(h)
    )
    if len(ids) != h:
        raise ValueError(f"{h} scores but {len(ids)} source ids")
    if not 1 <= k <= h:
        raise ValueError(f"k must be in [1, {h}], got {k}")
    if (s < 0).any() or (s > 1).any() or not np.isfinite(s).all():
        raise ValueError("scores must be finite and within [0, 1]")
    order = sorted(range(h), key=lambda j: (-s[j], j))
    top = order[:k]
    total = s[top].sum()
    if total <= 0:
        raise ValueError("no usable sources: all retained scores are zero")
    omega = np.zeros(h)
    omega[top] = s[top] / total
    return SourceWeights(source_ids=ids, s=s, k=k, omega=omega)


def make_schedule(
    weights: SourceWeights,
    n_batches: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> Schedule:
    """Draw the supervising source for each batch i.i.d. from the weights."""
    if n_batches < 1:
        raise ValueError("n_batches must be at least 1")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(weights.source_ids), size=n_batches, p=weights.omega)
    assignments = tuple(weights.source_ids[int(j)] for j in picks)
    return Schedule(assignments=assignments, seed=seed, batch_size=batch_size)


def batches_per_epoch(n_sentences: int, batch_size: int) -> int:
    return max(1, math.ceil(n_sentences / batch_size)) if n_sentences else 0


def distill(
    corpus: Corpus,
    schedule: Schedule,
    tagger: TaggerPort,
    *,
    export_dir: str | Path | None = None,
) -> TaggerPort:
    """Train the tagger on schedule-selected source layers, epoch by epoch.

    Every epoch reshuffles the sentence order with a sub-seed keyed by the
    epoch index and feeds batches in that order; batch b takes its tags from
    the b-th scheduled source. With ``export_dir`` set, each epoch's
    supervision is also written as a CoNLL file next to a JSON manifest of
    the schedule, so an external trainer can replay the exact procedure.
    """
    scheduled = set(schedule.assignments)
    for idx, sent in enumerate(corpus.sentences):
        for src in scheduled:
            if src not in sent.tags:
                raise MissingLayerError(
                    f"sentence {idx} has no {src!r} layer required by the schedule"
                )

    out_dir = Path(export_dir) if export_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    n = len(corpus.sentences)
    per_epoch = batches_per_epoch(n, schedule.batch_size)
    if per_epoch == 0 or not schedule.assignments:
        if out_dir is not None:
            _write_schedule_manifest(out_dir, schedule, epochs=0)
        return tagger

    pos = 0
    epoch = 0
    while pos < len(schedule.assignments):
        order = np.random.default_rng([schedule.seed, epoch]).permutation(n)
        epoch_lines: list[str] = []
        for b in range(per_epoch):
            if pos >= len(schedule.assignments):
                break
            src = schedule.assignments[pos]
            pos += 1
            batch = order[b * schedule.batch_size : (b + 1) * schedule.batch_size]
            examples = []
            for s_idx in batch:
                sent = corpus.sentences[int(s_idx)]
                examples.append((sent.tokens, sent.tags[src]))
            tagger.train(examples)
            if out_dir is not None:
                for tokens, tags in examples:
                    epoch_lines.extend(f"{tok} {tag}\n" for tok, tag in zip(tokens, tags))
                    epoch_lines.append("\n")
        if out_dir is not None:
            (out_dir / f"silver_epoch{epoch}.conll").write_text(
                "".join(epoch_lines), encoding="utf-8"
            )
        epoch += 1
    if out_dir is not None:
        _write_schedule_manifest(out_dir, schedule, epochs=epoch)
    return tagger


def _write_schedule_manifest(out_dir: Path, schedule: Schedule, epochs: int) -> None:
    payload = {
        "assignments": list(schedule.assignments),
        "batch_size": schedule.batch_size,
        "epochs": epochs,
        "seed": schedule.seed,
    }
    (out_dir / "schedule.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def finetune(
    tagger: TaggerPort, gold_small: Corpus, epochs: int = DEFAULT_FINETUNE_EPOCHS
) -> TaggerPort:
    """A fixed number of epochs over the gold layer, nothing else."""
    examples = []
    for idx, sent in enumerate(gold_small.sentences):
        if sent.gold is None:
            raise CorpusError(f"gold sentence {idx} has no gold layer")
        examples.append((sent.tokens, sent.gold))
    if examples and epochs > 0:
        tagger.fine_tune(examples, epochs)
    return tagger


def predict_corpus(tagger: TaggerPort, corpus: Corpus) -> Corpus:
    """Run the tagger over every sentence, filling the aggregate layer."""
    rows = [tagger.predict(sent.tokens) for sent in corpus.sentences]
    return corpus.with_aggregate(rows)
