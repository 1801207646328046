"""Unsupervised truth inference over categorical annotations.

Each of H sources labels N instances with one of K classes (some entries may
be missing). A latent true class per instance is drawn from a prior with a
symmetric Dirichlet(beta) hyperprior, and each source corrupts it through its
own K x K confusion matrix with Dirichlet(alpha) rows. Mean-field coordinate
ascent alternates closed-form updates:

    E[log pi_k]      = psi(beta  + sum_i q(z_i=k)) - psi(K*beta + N)
    E[log V_jkl]     = psi(alpha + sum_i q(z_i=k)[y_ij = l])
                       - psi(K*alpha + sum_i q(z_i=k) over i observed by j)
    q(z_i=k) propto exp(E[log pi_k] + sum_j E[log V_jk,y_ij])

until the evidence lower bound moves less than a tolerance. The consensus
label is the per-instance posterior argmax. All probability arithmetic stays
in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels

MISSING = -1


class NumericalError(RuntimeError):
    """Inference produced a non-finite bound."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class BeaConfig:
    """Priors, stopping rule, and instance granularity for one inference run."""

    alpha: float = 1.0
    beta: float = 1.0
    elbo_tol: float = 1e-6
    max_iter: int = 200
    granularity: str = "token"
    recall_include_outside: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.elbo_tol > 0:
            raise ValueError(f"elbo_tol must be positive, got {self.elbo_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.granularity not in ("token", "entity"):
            raise ValueError(f"unknown granularity: {self.granularity!r}")


@dataclass(frozen=True)
class AnnotationMatrix:
    """N x H observed class indices in [0, K), with -1 for missing.

    ``instance_index`` maps matrix rows back to corpus positions, e.g.
    (sentence, token) or (sentence, (start, end)). ``outside_class`` marks
    the class index that carries no entity (O) when one exists; reliability
    ranking excludes it by default.
    """

    y: np.ndarray
    k: int
    instance_index: tuple = ()
    outside_class: int | None = None

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.int32)
        if y.ndim != 2:
            raise ValueError(f"y must be N x H, got shape {y.shape}")
        object.__setattr__(self, "y", y)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if y.size:
            if y.min() < MISSING or y.max() >= self.k:
                raise ValueError(f"entries must lie in [-1, {self.k})")
            if not (y >= 0).any(axis=1).all():
                bare = int(np.flatnonzero(~(y >= 0).any(axis=1))[0])
                raise ValueError(f"instance {bare} has no observations")
        if self.instance_index and len(self.instance_index) != y.shape[0]:
            raise ValueError("instance_index length must equal N")
        if self.outside_class is not None and not 0 <= self.outside_class < self.k:
            raise ValueError(f"outside_class {self.outside_class} not in [0, {self.k})")

    @property
    def n_instances(self) -> int:
        return self.y.shape[0]

    @property
    def n_sources(self) -> int:
        return self.y.shape[1]

    def select_sources(self, indices: Sequence[int]) -> "AnnotationMatrix":
        """Column subset; kept instances may lose all their observations."""
        sub = np.ascontiguousarray(self.y[:, list(indices)])
        out = object.__new__(AnnotationMatrix)
        object.__setattr__(out, "y", sub)
        object.__setattr__(out, "k", self.k)
        object.__setattr__(out, "instance_index", self.instance_index)
        object.__setattr__(out, "outside_class", self.outside_class)
        return out


@dataclass
class VariationalState:
    """Factorized posterior: instance responsibilities plus the expected
    log prior and log confusion under the current Dirichlet factors.

    ``nk`` and ``njkl`` are the soft counts that produced ``elog_pi`` and
    ``elog_v``; they define the Dirichlet factors entering the bound.
    """

    qz: np.ndarray
    elog_pi: np.ndarray
    elog_v: np.ndarray
    nk: np.ndarray
    njkl: np.ndarray
    elbo_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class Posterior:
    state: VariationalState
    map_labels: np.ndarray
    mean_recall: np.ndarray
    n_iter: int
    converged: bool


@dataclass(frozen=True)
class SufficientStats:
    """Gold class counts for the supervised closed-form estimates."""

    n_k: np.ndarray
    n_jkl: np.ndarray
    n: int

    def __post_init__(self):
        n_k = np.asarray(self.n_k, dtype=np.float64)
        n_jkl = np.asarray(self.n_jkl, dtype=np.float64)
        object.__setattr__(self, "n_k", n_k)
        object.__setattr__(self, "n_jkl", n_jkl)
        if (n_k < 0).any() or (n_jkl < 0).any():
            raise ValueError("counts must be non-negative")
        if n_jkl.ndim != 3 or n_jkl.shape[1] != n_k.shape[0] or n_jkl.shape[2] != n_k.shape[0]:
            raise ValueError(f"n_jkl must be H x K x K, got {n_jkl.shape}")
        if not math.isclose(float(n_k.sum()), float(self.n), rel_tol=0, abs_tol=1e-9):
            raise ValueError("class counts must sum to the instance total")
        if (n_jkl.sum(axis=2) > n_k[None, :] + 1e-9).any():
            raise ValueError("per-source counts exceed class totals")

    @classmethod
    def from_posterior_onehot(cls, qz: np.ndarray, y: np.ndarray) -> "SufficientStats":
        """Counts from hard responsibilities; used for consistency checks."""
        njkl = _kernels.label_mass(np.ascontiguousarray(qz), y)
        return cls(n_k=qz.sum(axis=0), n_jkl=njkl, n=qz.shape[0])


def digamma(x):
    """Digamma of the active kernel backend (finite positive arguments)."""
    return _kernels.digamma(x)


def _lgamma_arr(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    flat_in, flat_out = x.ravel(), out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = math.lgamma(flat_in[i])
    return out


def _elog_from_counts(nk, njkl, n_total, config):
    """Dirichlet expected-log terms from soft counts (one update cycle)."""
    k = nk.shape[0]
    elog_pi = _kernels.digamma(config.beta + nk) - _kernels.digamma(
        np.asarray(k * config.beta + n_total)
    )
    njk = njkl.sum(axis=2)
    elog_v = _kernels.digamma(config.alpha + njkl) - _kernels.digamma(
        k * config.alpha + njk
    )[:, :, None]
    return elog_pi, elog_v


def _dirichlet_kl(lam: np.ndarray, prior: float) -> float:
    """KL(Dirichlet(lam) || Dirichlet(prior * 1)) summed over leading axes."""
    lam = np.asarray(lam, dtype=np.float64)
    k = lam.shape[-1]
    lam2 = lam.reshape(-1, k)
    total = lam2.sum(axis=1)
    term = (
        _lgamma_arr(total)
        - _lgamma_arr(lam2).sum(axis=1)
        - math.lgamma(k * prior)
        + k * math.lgamma(prior)
    )
    dig_rows = _kernels.digamma(lam2) - _kernels.digamma(total)[:, None]
    term = term + ((lam2 - prior) * dig_rows).sum(axis=1)
    return float(term.sum())


def init_state(matrix: AnnotationMatrix, config: BeaConfig) -> VariationalState:
    """Majority-vote responsibilities, then one expected-log pass.

    Voting breaks the label symmetry of the model; rows without any
    observation (possible after source filtering) start uniform.
    """
    y = matrix.y
    n, k = matrix.n_instances, matrix.k
    qz = np.zeros((n, k))
    for c in range(k):
        qz[:, c] = (y == c).sum(axis=1)
    totals = qz.sum(axis=1)
    empty = totals == 0
    qz[empty] = 1.0 / k
    qz[~empty] /= totals[~empty, None]
    qz = np.ascontiguousarray(qz)
    nk = qz.sum(axis=0)
    njkl = _kernels.label_mass(qz, y)
    elog_pi, elog_v = _elog_from_counts(nk, njkl, n, config)
    return VariationalState(qz=qz, elog_pi=elog_pi, elog_v=elog_v, nk=nk, njkl=njkl)


def update_pi(state: VariationalState, matrix: AnnotationMatrix, config: BeaConfig):
    """Expected log class prior from the current responsibilities."""
    nk = state.qz.sum(axis=0)
    k = matrix.k
    return _kernels.digamma(config.beta + nk) - _kernels.digamma(
        np.asarray(k * config.beta + matrix.n_instances)
    )


def update_v(state: VariationalState, matrix: AnnotationMatrix, config: BeaConfig):
    """Expected log confusion rows from the current responsibilities."""
    njkl = _kernels.label_mass(np.ascontiguousarray(state.qz), matrix.y)
    njk = njkl.sum(axis=2)
    return _kernels.digamma(config.alpha + njkl) - _kernels.digamma(
        matrix.k * config.alpha + njk
    )[:, :, None]


def update_qz(state: VariationalState, matrix: AnnotationMatrix, config: BeaConfig):
    """Row-normalized posterior responsibilities given the expected logs."""
    qz, _ = _kernels.posterior_step(matrix.y, state.elog_pi, state.elog_v)
    return qz


def elbo(state: VariationalState, matrix: AnnotationMatrix, config: BeaConfig) -> float:
    """Evidence lower bound of the current state.

    Data and prior expectations use the current responsibilities; the
    Dirichlet KL penalties use the factors recorded in the state (the counts
    that produced its expected-log terms).
    """
    qz = state.qz
    nk_cur = qz.sum(axis=0)
    njkl_cur = _kernels.label_mass(np.ascontiguousarray(qz), matrix.y)
    data = float((njkl_cur * state.elog_v).sum()) + float(nk_cur @ state.elog_pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(qz > 0, qz * np.log(qz), 0.0)
    entropy = -float(plogp.sum())
    kl_pi = _dirichlet_kl(config.beta + state.nk, config.beta)
    kl_v = _dirichlet_kl(config.alpha + state.njkl, config.alpha)
    return data + entropy - kl_pi - kl_v


def expected_confusion(state: VariationalState) -> np.ndarray:
    """Row-normalized exp of the expected log confusion, one matrix per source."""
    v = np.exp(state.elog_v)
    return v / v.sum(axis=2, keepdims=True)


def _mean_recall(state: VariationalState, matrix: AnnotationMatrix, config: BeaConfig):
    conf = expected_confusion(state)
    diag = np.einsum("jkk->jk", conf)
    if matrix.outside_class is not None and not config.recall_include_outside:
        keep = [c for c in range(matrix.k) if c != matrix.outside_class]
        if keep:
            diag = diag[:, keep]
    return diag.mean(axis=1)


def run_bea(matrix: AnnotationMatrix, config: BeaConfig | None = None) -> Posterior:
    """Fit the aggregation model by coordinate ascent until the bound settles.

    Stops when the bound changes by less than ``elbo_tol`` between cycles or
    after ``max_iter`` cycles. Raises :class:`NumericalError` on a non-finite
    bound.
    """
    config = config or BeaConfig()
    state = init_state(matrix, config)
    trace = state.elbo_trace
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        qz, lse_sum = _kernels.posterior_step(matrix.y, state.elog_pi, state.elog_v)
        state.qz = qz
        bound = (
            lse_sum
            - _dirichlet_kl(config.beta + state.nk, config.beta)
            - _dirichlet_kl(config.alpha + state.njkl, config.alpha)
        )
        if not math.isfinite(bound):
            raise NumericalError("ELBO is not finite", it)
        trace.append(bound)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < config.elbo_tol:
            converged = True
            break
        state.nk = qz.sum(axis=0)
        state.njkl = _kernels.label_mass(qz, matrix.y)
        state.elog_pi, state.elog_v = _elog_from_counts(
            state.nk, state.njkl, matrix.n_instances, config
        )
    return Posterior(
        state=state,
        map_labels=state.qz.argmax(axis=1) if matrix.n_instances else np.zeros(0, dtype=int),
        mean_recall=_mean_recall(state, matrix, config),
        n_iter=it,
        converged=converged,
    )


def posterior_from_params(
    matrix: AnnotationMatrix,
    elog_pi: np.ndarray,
    elog_v: np.ndarray,
    config: BeaConfig,
) -> Posterior:
    """Single posterior pass with frozen prior and confusion expectations.

    Used by the supervised variant, where the expected logs come from gold
    counts and only the instance posteriors are inferred on new data.
    """
    qz, _ = _kernels.posterior_step(matrix.y, elog_pi, elog_v)
    state = VariationalState(
        qz=qz,
        elog_pi=np.asarray(elog_pi, dtype=np.float64),
        elog_v=np.asarray(elog_v, dtype=np.float64),
        nk=qz.sum(axis=0),
        njkl=_kernels.label_mass(qz, matrix.y),
        elbo_trace=[],
    )
    return Posterior(
        state=state,
        map_labels=qz.argmax(axis=1) if matrix.n_instances else np.zeros(0, dtype=int),
        mean_recall=_mean_recall(state, matrix, config),
        n_iter=1,
        converged=True,
    )


def supervised_estimate(
    stats: SufficientStats,
    config: BeaConfig,
    *,
    alpha: float | None = None,
    beta: float | None = None,
):
    """Closed-form expected logs from gold counts.

    The prior concentrations act as pseudo-counts so empty cells fall back
    to the prior instead of hitting the digamma pole at zero. Passing
    ``alpha=0``/``beta=0`` recovers the raw count form, which requires every
    involved count to be positive.
    """
    a = config.alpha if alpha is None else alpha
    b = config.beta if beta is None else beta
    if a < 0 or b < 0:
        raise ValueError("pseudo-counts must be non-negative")
    k = stats.n_k.shape[0]
    elog_pi = _kernels.digamma(stats.n_k + b) - _kernels.digamma(
        np.asarray(float(stats.n) + k * b)
    )
    row_totals = stats.n_jkl.sum(axis=2)
    elog_v = _kernels.digamma(stats.n_jkl + a) - _kernels.digamma(
        row_totals + k * a
    )[:, :, None]
    return elog_pi, elog_v


def spammer_filter(
    posterior: Posterior,
    matrix: AnnotationMatrix,
    k_keep: int,
    config: BeaConfig | None = None,
) -> tuple[Posterior, tuple[int, ...]]:
    """Keep the k most reliable sources and rerun inference on them alone.

    Sources are ranked by mean recall (the normalized confusion diagonals
    averaged over entity classes); ties keep the earlier column. Returns the
    rerun posterior over the filtered matrix and the kept column indices.
    """
    config = config or BeaConfig()
    h = matrix.n_sources
    if k_keep < 1:
        raise ValueError("k_keep must be at least 1")
    if k_keep > h:
        raise ValueError(f"k_keep {k_keep} exceeds source count {h}")
    order = sorted(range(h), key=lambda j: (-posterior.mean_recall[j], j))
    kept = tuple(sorted(order[:k_keep]))
    filtered = matrix.select_sources(kept)
    return run_bea(filtered, config), kept
