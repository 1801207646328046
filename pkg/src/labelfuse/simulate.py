"""Synthetic aggregation problems with known ground truth.

Instances get a true class from a categorical prior; each source corrupts
it through its own confusion matrix, independently per instance. Because the
truth is known, these problems serve as the oracle for recovery tests: how
often the consensus matches the latent labels and how close the estimated
confusion matrices come to the generating ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .bayes import AnnotationMatrix, Posterior, expected_confusion
from .conll import Corpus, LabelSet, Sentence


@dataclass(frozen=True)
class SourceSpec:
    """Recipe for one source's confusion matrix.

    kind "reliable": probability ``diag`` on the true class, the rest spread
    uniformly. kind "spammer": uniform rows regardless of the truth. kind
    "adversary": a reliable matrix with its mass moved to ``perm`` of the
    true class, so the source is systematically wrong where ``perm`` moves
    a class.
    """

    kind: str
    diag: float = 0.9
    perm: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("reliable", "spammer", "adversary"):
            raise ValueError(f"unknown source kind: {self.kind!r}")
        if not 0.0 < self.diag <= 1.0:
            raise ValueError(f"diag must be in (0, 1], got {self.diag}")
        if self.kind == "adversary" and self.perm is None:
            raise ValueError("adversary sources need a permutation")

    def confusion(self, k: int) -> np.ndarray:
        if self.kind == "spammer":
            return np.full((k, k), 1.0 / k)
        off = (1.0 - self.diag) / (k - 1) if k > 1 else 0.0
        v = np.full((k, k), off)
        if self.kind == "reliable":
            np.fill_diagonal(v, self.diag)
            return v
        perm = self.perm
        if len(perm) != k or sorted(perm) != list(range(k)):
            raise ValueError(f"perm must be a permutation of range({k})")
        for row in range(k):
            v[row, :] = off
            v[row, perm[row]] = self.diag
        return v


@dataclass(frozen=True)
class SynthConfig:
    n: int
    k: int
    sources: tuple[SourceSpec, ...]
    pi: tuple[float, ...] | None = None
    pi_concentration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not self.sources:
            raise ValueError("at least one source is required")
        if self.pi is not None:
            pi = np.asarray(self.pi, dtype=np.float64)
            if pi.shape != (self.k,) or (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
                raise ValueError("pi must be a length-k simplex vector")


@dataclass(frozen=True)
class SynthProblem:
    matrix: AnnotationMatrix
    z_true: np.ndarray
    v_true: np.ndarray
    pi_true: np.ndarray
    config: SynthConfig


def generate(config: SynthConfig) -> SynthProblem:
    """Sample a full problem; deterministic given the config seed."""
    rng = np.random.default_rng(config.seed)
    k = config.k
    if config.pi is not None:
        pi = np.asarray(config.pi, dtype=np.float64)
    else:
        pi = rng.dirichlet(np.full(k, config.pi_concentration))
    z = rng.choice(k, size=config.n, p=pi)
    h = len(config.sources)
    v = np.stack([spec.confusion(k) for spec in config.sources])
    y = np.empty((config.n, h), dtype=np.int32)
    for j in range(h):
        # Inverse-CDF sampling keeps one uniform draw per (instance, source).
        cdf = np.cumsum(v[j], axis=1)
        u = rng.random(config.n)
        y[:, j] = (u[:, None] > cdf[z]).sum(axis=1)
    matrix = AnnotationMatrix(y=y, k=k, outside_class=None)
    return SynthProblem(matrix=matrix, z_true=z, v_true=v, pi_true=pi, config=config)


@dataclass(frozen=True)
class Recovery:
    accuracy: float
    confusion_l1: float
    permutation: tuple[int, ...]
    aligned_confusion: np.ndarray


def recovery_error(posterior: Posterior, problem: SynthProblem) -> Recovery:
    """Label accuracy and confusion distance against the generating truth.

    The model is symmetric under relabelling its latent classes, so the
    comparison aligns them first: the permutation maximizing label agreement
    (searched exhaustively, hence k <= 8) is applied to both the labels and
    the confusion rows. With majority-vote initialization the identity wins
    in practice, but alignment keeps the tests honest near symmetry.
    """
    z_true = problem.z_true
    k = problem.config.k
    if k > 8:
        raise ValueError("exhaustive alignment supports k <= 8")
    if posterior.map_labels.shape != z_true.shape:
        raise ValueError(
            f"shape mismatch: {posterior.map_labels.shape} vs {z_true.shape}"
        )
    best_perm = tuple(range(k))
    best_hits = -1
    for perm in permutations(range(k)):
        lookup = np.asarray(perm)
        hits = int((lookup[posterior.map_labels] == z_true).sum())
        if hits > best_hits:
            best_hits = hits
            best_perm = perm
    accuracy = best_hits / len(z_true) if len(z_true) else 1.0

    est = expected_confusion(posterior.state)
    aligned = np.empty_like(est)
    lookup = np.asarray(best_perm)
    for j in range(est.shape[0]):
        aligned[j, lookup, :] = est[j]
    l1 = float(np.abs(aligned - problem.v_true).mean())
    return Recovery(
        accuracy=accuracy,
        confusion_l1=l1,
        permutation=best_perm,
        aligned_confusion=aligned,
    )


def to_corpus(
    problem: SynthProblem,
    sentence_len: int = 10,
    vocab_per_class: int = 25,
    source_ids: Sequence[str] | None = None,
) -> Corpus:
    """Render a generated problem as a token corpus with gold labels.

    Class 0 maps to O and class c to a single-token B-Tc span. Token strings
    are drawn from a class-keyed vocabulary (seeded by the problem config),
    so lexical taggers trained on one split carry signal to another.
    """
    k = problem.config.k
    label_set = LabelSet(tuple(f"T{c}" for c in range(1, k)))
    tag_of = ["O"] + [f"B-{t}" for t in label_set.entity_types]
    h = problem.matrix.n_sources
    ids = tuple(source_ids) if source_ids is not None else tuple(
        f"m{j + 1:02d}" for j in range(h)
    )
    if len(ids) != h:
        raise ValueError(f"{h} sources but {len(ids)} ids")

    rng = np.random.default_rng([problem.config.seed, 7])
    word = rng.integers(vocab_per_class, size=problem.config.n)
    tokens = [
        f"t{int(z) * vocab_per_class + int(w)}" for z, w in zip(problem.z_true, word)
    ]

    sentences = []
    y = problem.matrix.y
    n = problem.config.n
    for start in range(0, n, sentence_len):
        stop = min(start + sentence_len, n)
        sent_tokens = tuple(tokens[start:stop])
        tags = {
            ids[j]: tuple(tag_of[y[i, j]] for i in range(start, stop)) for j in range(h)
        }
        gold = tuple(tag_of[problem.z_true[i]] for i in range(start, stop))
        sentences.append(Sentence(tokens=sent_tokens, tags=tags, gold=gold))
    return Corpus(sentences=tuple(sentences), label_set=label_set, source_ids=ids)
