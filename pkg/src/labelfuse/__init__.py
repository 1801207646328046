"""labelfuse: consensus sequence labelling from many unreliable taggers.

Aggregates the predictions of H black-box sequence taggers into a single
labelling by majority voting, unsupervised Bayesian truth inference over
per-source confusion matrices (at token or entity granularity, with
optional spammer filtering and a few-shot supervised variant), or by
ranking sources on a small gold set and distilling a student tagger from a
weight-proportional mixture of their outputs.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .aggregate import aggregate, entity_matrix, token_matrix
from .bayes import (
    AnnotationMatrix,
    BeaConfig,
    NumericalError,
    Posterior,
    SufficientStats,
    run_bea,
    spammer_filter,
    supervised_estimate,
)
from .conll import (
    Corpus,
    CorpusError,
    LabelSet,
    Sentence,
    parse_conll,
    repair_bio,
    validate_bio,
    write_conll,
)
from .distill import (
    MemoTagger,
    Schedule,
    SourceWeights,
    distill,
    finetune,
    make_schedule,
    rank_sources,
    truncate_normalize,
)
from .metrics import Score, entity_f1, token_accuracy
from .simulate import SourceSpec, SynthConfig, generate, recovery_error, to_corpus
from .spans import EntitySpan, decode_spans, encode_spans, resolve_conflicts
from .voting import mv_entity, mv_token, oracle_select

__version__ = "0.1.0"

__all__ = [
    "AnnotationMatrix",
    "BeaConfig",
    "Corpus",
    "CorpusError",
    "EntitySpan",
    "KERNEL_BACKEND",
    "LabelSet",
    "MemoTagger",
    "NumericalError",
    "Posterior",
    "Schedule",
    "Score",
    "Sentence",
    "SourceSpec",
    "SourceWeights",
    "SufficientStats",
    "SynthConfig",
    "aggregate",
    "decode_spans",
    "distill",
    "encode_spans",
    "entity_f1",
    "entity_matrix",
    "finetune",
    "generate",
    "make_schedule",
    "mv_entity",
    "mv_token",
    "oracle_select",
    "parse_conll",
    "rank_sources",
    "recovery_error",
    "repair_bio",
    "resolve_conflicts",
    "run_bea",
    "spammer_filter",
    "supervised_estimate",
    "to_corpus",
    "token_accuracy",
    "token_matrix",
    "truncate_normalize",
    "validate_bio",
    "write_conll",
]
