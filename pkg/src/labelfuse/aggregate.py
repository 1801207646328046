"""Corpus-level consensus: build annotation matrices at token or entity
granularity, run the chosen aggregation method, and emit a valid-BIO layer.

Token granularity treats every (sentence, token) position as an instance
over the 2T+1 token tags; the raw consensus row can break the BIO scheme,
so the emitted layer is repaired. Entity granularity aggregates over the
union of predicted spans with T+1 labels and resolves overlaps greedily,
which is BIO-consistent by construction.
"""

from __future__ import annotations

import numpy as np

from . import voting
from .bayes import (
    AnnotationMatrix,
    BeaConfig,
    Posterior,
    SufficientStats,
    posterior_from_params,
    run_bea,
    spammer_filter,
    supervised_estimate,
)
from .conll import Corpus, CorpusError, LabelSet, repair_bio
from .metrics import confusion_report
from .spans import (
    EntitySpan,
    ScoredSpan,
    build_range_view,
    decode_spans,
    encode_spans,
    resolve_conflicts,
)

METHODS = ("mv", "bea", "bea2", "bea_sup")

DEFAULT_TOP_K = 10


def token_label_index(label_set: LabelSet) -> dict[str, int]:
    return {tag: i for i, tag in enumerate(label_set.token_labels)}


def entity_label_index(label_set: LabelSet) -> dict[str, int]:
    return {lab: i for i, lab in enumerate(label_set.entity_labels)}


def token_matrix(corpus: Corpus) -> AnnotationMatrix:
    """One instance per token; sentences a source skipped become missing."""
    index = token_label_index(corpus.label_set)
    rows = []
    keys = []
    for s_idx, sent in enumerate(corpus.sentences):
        layers = [sent.tags.get(src) for src in corpus.source_ids]
        for t_idx in range(len(sent)):
            rows.append(
                [index[layer[t_idx]] if layer is not None else -1 for layer in layers]
            )
            keys.append((s_idx, t_idx))
    y = np.asarray(rows, dtype=np.int32).reshape(len(rows), len(corpus.source_ids))
    return AnnotationMatrix(
        y=y,
        k=len(index),
        instance_index=tuple(keys),
        outside_class=0,
    )


def entity_matrix(corpus: Corpus) -> AnnotationMatrix:
    """One instance per candidate range from the per-sentence range views."""
    index = entity_label_index(corpus.label_set)
    rows = []
    keys = []
    for s_idx, sent in enumerate(corpus.sentences):
        view = build_range_view(sent)
        for r_idx, rng in enumerate(view.ranges):
            row = []
            for src in corpus.source_ids:
                labels = view.labels.get(src)
                row.append(index[labels[r_idx]] if labels is not None else -1)
            rows.append(row)
            keys.append((s_idx, rng))
    y = np.asarray(rows, dtype=np.int32).reshape(len(rows), len(corpus.source_ids))
    return AnnotationMatrix(
        y=y,
        k=len(index),
        instance_index=tuple(keys),
        outside_class=0,
    )


def _token_rows_from_labels(corpus, matrix, labels) -> list[tuple[str, ...]]:
    tags = corpus.label_set.token_labels
    rows = [["O"] * len(sent) for sent in corpus.sentences]
    for (s_idx, t_idx), lab in zip(matrix.instance_index, labels):
        rows[s_idx][t_idx] = tags[lab]
    return [repair_bio(row, corpus.label_set) for row in rows]


def _entity_rows_from_posterior(corpus, matrix, posterior) -> list[tuple[str, ...]]:
    entity_labels = corpus.label_set.entity_labels
    per_sentence: dict[int, list[ScoredSpan]] = {}
    for inst, lab in enumerate(posterior.map_labels):
        if lab == 0:
            continue
        s_idx, (start, end) = matrix.instance_index[inst]
        score = float(posterior.state.qz[inst, lab])
        per_sentence.setdefault(s_idx, []).append(
            ScoredSpan(EntitySpan(start, end, entity_labels[lab]), score)
        )
    rows = []
    for s_idx, sent in enumerate(corpus.sentences):
        spans = resolve_conflicts(per_sentence.get(s_idx, []))
        rows.append(encode_spans(spans, len(sent)))
    return rows


def _gold_entity_stats(gold_small: Corpus) -> SufficientStats:
    """Range-level counts where the truth is gold's exact-span label."""
    index = entity_label_index(gold_small.label_set)
    k = len(index)
    h = len(gold_small.source_ids)
    n_k = np.zeros(k)
    n_jkl = np.zeros((h, k, k))
    total = 0
    for s_idx, sent in enumerate(gold_small.sentences):
        if sent.gold is None:
            raise CorpusError(f"gold sentence {s_idx} has no gold layer")
        view = build_range_view(sent)
        if not view.ranges:
            continue
        gold_map = {
            (sp.start, sp.end): sp.etype for sp in decode_spans(sent.gold, strict=False)
        }
        for r_idx, rng in enumerate(view.ranges):
            z = index[gold_map.get(rng, "O")]
            n_k[z] += 1
            total += 1
            for j, src in enumerate(gold_small.source_ids):
                labels = view.labels.get(src)
                if labels is not None:
                    n_jkl[j, z, index[labels[r_idx]]] += 1
    return SufficientStats(n_k=n_k, n_jkl=n_jkl, n=total)


def _gold_token_stats(gold_small: Corpus) -> SufficientStats:
    index = token_label_index(gold_small.label_set)
    k = len(index)
    h = len(gold_small.source_ids)
    n_k = np.zeros(k)
    n_jkl = np.zeros((h, k, k))
    total = 0
    for s_idx, sent in enumerate(gold_small.sentences):
        if sent.gold is None:
            raise CorpusError(f"gold sentence {s_idx} has no gold layer")
        for t_idx in range(len(sent)):
            z = index[sent.gold[t_idx]]
            n_k[z] += 1
            total += 1
            for j, src in enumerate(gold_small.source_ids):
                layer = sent.tags.get(src)
                if layer is not None:
                    n_jkl[j, z, index[layer[t_idx]]] += 1
    return SufficientStats(n_k=n_k, n_jkl=n_jkl, n=total)


def gold_stats(gold_small: Corpus, granularity: str) -> SufficientStats:
    if granularity == "entity":
        return _gold_entity_stats(gold_small)
    return _gold_token_stats(gold_small)


def _posterior_for(
    corpus: Corpus,
    matrix: AnnotationMatrix,
    method: str,
    config: BeaConfig,
    gold_small: Corpus | None,
    k_keep: int,
):
    kept = tuple(range(matrix.n_sources))
    if method == "bea":
        posterior = run_bea(matrix, config)
    elif method == "bea2":
        first = run_bea(matrix, config)
        posterior, kept = spammer_filter(first, matrix, min(k_keep, matrix.n_sources), config)
    elif method == "bea_sup":
        if gold_small is None:
            raise CorpusError("the supervised method requires a gold corpus")
        if gold_small.source_ids != corpus.source_ids:
            raise CorpusError("gold corpus must carry the same sources as the inputs")
        stats = gold_stats(gold_small, config.granularity)
        elog_pi, elog_v = supervised_estimate(stats, config)
        posterior = posterior_from_params(matrix, elog_pi, elog_v, config)
    else:
        raise ValueError(f"unknown method: {method!r}")
    return posterior, kept


def aggregate(
    corpus: Corpus,
    method: str,
    config: BeaConfig | None = None,
    gold_small: Corpus | None = None,
    *,
    seed: int = 0,
    k_keep: int = DEFAULT_TOP_K,
) -> tuple[Corpus, dict]:
    """Aggregate all source layers into one consensus layer.

    Returns the corpus with its aggregate layer filled in and a report
    dictionary (confusion matrices, reliability ranking, bound trace for the
    Bayesian methods; vote metadata for majority voting).
    """
    config = config or BeaConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")

    report: dict = {
        "schema": 1,
        "method": method,
        "granularity": config.granularity,
        "sources": {},
        "n_sentences": len(corpus),
        "n_tokens": corpus.n_tokens,
    }

    if method == "mv":
        if config.granularity == "token":
            rows = voting.mv_token_rows(corpus, seed)
            rows = [repair_bio(row, corpus.label_set) for row in rows]
        else:
            rows = []
            for s_idx, sent in enumerate(corpus.sentences):
                spans = voting.mv_entity(sent, np.random.default_rng([seed, s_idx]))
                rows.append(encode_spans(spans, len(sent)))
        return corpus.with_aggregate(rows), report

    matrix = token_matrix(corpus) if config.granularity == "token" else entity_matrix(corpus)
    if matrix.n_instances == 0:
        rows = [("O",) * len(sent) for sent in corpus.sentences]
        return corpus.with_aggregate(rows), report

    posterior, kept = _posterior_for(corpus, matrix, method, config, gold_small, k_keep)
    kept_ids = [corpus.source_ids[j] for j in kept]
    sub_report = confusion_report(posterior, kept_ids)
    report.update(sub_report)
    report["kept_sources"] = kept_ids

    if config.granularity == "token":
        rows = _token_rows_from_labels(corpus, matrix, posterior.map_labels)
    else:
        rows = _entity_rows_from_posterior(corpus, matrix, posterior)
    return corpus.with_aggregate(rows), report


def posterior_for_matrix(matrix: AnnotationMatrix, config: BeaConfig | None = None) -> Posterior:
    """Convenience wrapper used by callers that already built a matrix."""
    return run_bea(matrix, config or BeaConfig())
