"""Phrase-based precision/recall/F1 and token accuracy.

A predicted span counts as correct only when a gold span matches it exactly
in start, end, and type (the CoNLL-2003 convention, no partial credit).
Corpus scores are micro-averaged: tp/fp/fn are summed over sentences before
the ratios are taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conll import Corpus
from .spans import EntitySpan, spans_per_sentence


@dataclass(frozen=True)
class Score:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def entity_f1(
    pred: Sequence[Sequence[EntitySpan]],
    gold: Sequence[Sequence[EntitySpan]],
) -> Score:
    """Micro-averaged exact-match span F1 over parallel sentence lists."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sentences vs {len(gold)} gold")
    tp = fp = fn = 0
    for p_spans, g_spans in zip(pred, gold):
        p_set, g_set = set(p_spans), set(g_spans)
        tp += len(p_set & g_set)
        fp += len(p_set - g_set)
        fn += len(g_set - p_set)
    return Score(tp=tp, fp=fp, fn=fn)


def entity_f1_layers(corpus: Corpus, pred_layer: str, gold_layer: str = "gold") -> Score:
    """Span F1 of one corpus layer against another, usually gold."""
    return entity_f1(
        spans_per_sentence(corpus, pred_layer),
        spans_per_sentence(corpus, gold_layer),
    )


def token_accuracy(pred, gold) -> float:
    """Fraction of positions where the two label sequences agree."""
    p = np.asarray(pred)
    g = np.asarray(gold)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    if p.size == 0:
        return 1.0
    return float(np.mean(p == g))


def confusion_report(posterior, source_ids: Sequence[str] | None = None) -> dict:
    """Structured per-source reliability report from a fitted posterior.

    Rows of each confusion matrix are normalized to sum to one; the mean
    recall column is exactly the posterior's own ranking statistic.
    """
    from .bayes import expected_confusion

    conf = expected_confusion(posterior.state)
    h = conf.shape[0]
    ids = list(source_ids) if source_ids is not None else [f"src{j + 1}" for j in range(h)]
    if len(ids) != h:
        raise ValueError(f"{h} sources in posterior but {len(ids)} ids")
    order = sorted(range(h), key=lambda j: (-posterior.mean_recall[j], ids[j]))
    return {
        "sources": {
            ids[j]: {
                "confusion": [[float(x) for x in row] for row in conf[j]],
                "mean_recall": float(posterior.mean_recall[j]),
            }
            for j in range(h)
        },
        "ranking": [ids[j] for j in order],
        "iterations": posterior.n_iter,
        "converged": posterior.converged,
        "elbo_trace": [float(v) for v in posterior.state.elbo_trace],
    }
