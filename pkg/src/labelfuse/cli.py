"""Command-line front end.

Subcommands: aggregate, rank, distill, finetune, score, simulate, repair.
Every run is deterministic under a fixed --seed and emits a manifest (to
stdout, or to --manifest when given) recording the command, configuration,
input digests, and timings. Exit codes: 0 success, 1 usage error, 2 data or
validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .aggregate import DEFAULT_TOP_K, aggregate
from .bayes import BeaConfig, NumericalError
from .conll import (
    Corpus,
    CorpusError,
    LabelSet,
    attach_gold,
    load_sources,
    parse_conll,
    write_conll,
    write_conll_multi,
)
from .distill import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_DISTILL_EPOCHS,
    DEFAULT_FINETUNE_EPOCHS,
    MemoTagger,
    batches_per_epoch,
    distill,
    finetune,
    make_schedule,
    predict_corpus,
    rank_sources,
    truncate_normalize,
)
from .metrics import entity_f1_layers
from .simulate import SourceSpec, SynthConfig, generate, to_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2; this tool reserves 2 for
    data errors, so usage problems are rethrown and exit 1."""

    def error(self, message):
        raise UsageError(message)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _label_set(args) -> LabelSet:
    types = tuple(t for t in args.types.split(",") if t)
    return LabelSet(types)


def _read_inputs(args, label_set: LabelSet) -> Corpus:
    corpus = load_sources(args.inputs, label_set, args.repair_policy)
    if getattr(args, "gold", None):
        gold = parse_conll(
            Path(args.gold).read_text(encoding="utf-8"), label_set, args.repair_policy
        )
        corpus = attach_gold(corpus, gold)
    return corpus


def _emit_manifest(args, command: str, config: dict, started: float) -> None:
    digests = {}
    for name in ("inputs",):
        for p in getattr(args, name, []) or []:
            digests[str(p)] = _sha256(Path(p))
    for name in ("gold", "pred", "tagger"):
        value = getattr(args, name, None)
        if value:
            digests[str(value)] = _sha256(Path(value))
    manifest = {
        "command": command,
        "config": config,
        "inputs": digests,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    if getattr(args, "manifest", None):
        Path(args.manifest).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _add_common(p: argparse.ArgumentParser, *, inputs: bool = True) -> None:
    if inputs:
        p.add_argument("inputs", nargs="+", help="source CoNLL files (or one multi-column file)")
    p.add_argument("--types", default="PER,ORG,LOC", help="comma-separated entity types")
    p.add_argument(
        "--repair-policy",
        default="repair",
        choices=("strict", "repair"),
        help="how to treat scheme violations in the inputs",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", help="write the run manifest here instead of stdout")
    p.add_argument("--threads", type=int, default=1, help="worker cap for parallel stages")


def _cmd_aggregate(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    corpus = _read_inputs(args, label_set)
    config = BeaConfig(
        alpha=args.alpha,
        beta=args.beta,
        elbo_tol=args.tol,
        max_iter=args.max_iter,
        granularity=args.granularity,
    )
    method = args.method.replace("-", "_")
    gold_small = None
    if method == "bea_sup":
        if not args.gold:
            raise UsageError("--method bea-sup requires --gold")
        gold_small = corpus
    result, report = aggregate(
        corpus, method, config, gold_small, seed=args.seed, k_keep=args.top_k
    )
    Path(args.out).write_text(write_conll(result, "aggregate"), encoding="utf-8")
    if args.report:
        _write_json(args.report, report)
    _emit_manifest(
        args,
        "aggregate",
        {
            "alpha": args.alpha,
            "beta": args.beta,
            "granularity": args.granularity,
            "max_iter": args.max_iter,
            "method": args.method,
            "out": str(args.out),
            "tol": args.tol,
            "top_k": args.top_k,
        },
        started,
    )
    return EXIT_OK


def _cmd_rank(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    if not args.gold:
        raise UsageError("rank requires --gold")
    corpus = _read_inputs(args, label_set)
    s = rank_sources(corpus)
    weights = truncate_normalize(s, min(args.top_k, len(corpus.source_ids)), corpus.source_ids)
    payload = {"schema": 1, **weights.as_dict()}
    if args.out:
        _write_json(args.out, payload)
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit_manifest(args, "rank", {"top_k": args.top_k}, started)
    return EXIT_OK


def _cmd_distill(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    if not args.gold:
        raise UsageError("distill requires --gold for ranking")
    corpus = _read_inputs(args, label_set)
    s = rank_sources(corpus)
    weights = truncate_normalize(s, min(args.top_k, len(corpus.source_ids)), corpus.source_ids)
    n_batches = args.epochs * batches_per_epoch(len(corpus), args.batch_size)
    schedule = make_schedule(weights, max(1, n_batches), args.seed, args.batch_size)
    tagger = MemoTagger(label_set)
    distill(corpus, schedule, tagger, export_dir=args.silver_dir)
    if args.tagger_out:
        _write_json(args.tagger_out, tagger.to_dict())
    if args.out:
        predicted = predict_corpus(tagger, corpus)
        Path(args.out).write_text(write_conll(predicted, "aggregate"), encoding="utf-8")
    _emit_manifest(
        args,
        "distill",
        {
            "batch_size": args.batch_size,
            "epochs": args.epochs,
            "omega": [float(w) for w in weights.omega],
            "top_k": args.top_k,
        },
        started,
    )
    return EXIT_OK


def _cmd_finetune(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    tagger = MemoTagger.from_dict(json.loads(Path(args.tagger).read_text(encoding="utf-8")))
    gold = parse_conll(
        Path(args.gold).read_text(encoding="utf-8"), label_set, args.repair_policy
    )
    gold_corpus = attach_gold(gold, gold)
    finetune(tagger, gold_corpus, args.epochs)
    if args.tagger_out:
        _write_json(args.tagger_out, tagger.to_dict())
    if args.inputs and args.out:
        corpus = load_sources(args.inputs, label_set, args.repair_policy)
        predicted = predict_corpus(tagger, corpus)
        Path(args.out).write_text(write_conll(predicted, "aggregate"), encoding="utf-8")
    _emit_manifest(args, "finetune", {"epochs": args.epochs}, started)
    return EXIT_OK


def _cmd_score(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    pred = parse_conll(
        Path(args.pred).read_text(encoding="utf-8"), label_set, args.repair_policy
    )
    gold = parse_conll(
        Path(args.gold).read_text(encoding="utf-8"), label_set, args.repair_policy
    )
    merged = attach_gold(pred, gold)
    score = entity_f1_layers(merged, merged.source_ids[0])
    payload = {"schema": 1, **score.as_dict()}
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit_manifest(args, "score", {}, started)
    return EXIT_OK


def _adversary_perm(index: int, k: int) -> tuple[int, ...]:
    shift = (index % (k - 1)) + 1
    return tuple((c + shift) % k for c in range(k))


def _cmd_simulate(args) -> int:
    started = time.perf_counter()
    n_reliable = args.h - args.spammers - args.adversaries
    if n_reliable < 0:
        raise UsageError("--spammers plus --adversaries exceeds --h")
    sources = [SourceSpec("reliable", diag=args.diag) for _ in range(n_reliable)]
    sources += [SourceSpec("spammer") for _ in range(args.spammers)]
    sources += [
        SourceSpec("adversary", diag=args.diag, perm=_adversary_perm(i, args.k))
        for i in range(args.adversaries)
    ]
    config = SynthConfig(n=args.n, k=args.k, sources=tuple(sources), seed=args.seed)
    problem = generate(config)
    corpus = to_corpus(problem, sentence_len=args.sentence_len)
    Path(args.out).write_text(write_conll_multi(corpus), encoding="utf-8")
    if args.gold_out:
        Path(args.gold_out).write_text(write_conll(corpus, "gold"), encoding="utf-8")
    _emit_manifest(
        args,
        "simulate",
        {
            "adversaries": args.adversaries,
            "diag": args.diag,
            "h": args.h,
            "k": args.k,
            "n": args.n,
            "sentence_len": args.sentence_len,
            "spammers": args.spammers,
        },
        started,
    )
    return EXIT_OK


def _cmd_repair(args) -> int:
    started = time.perf_counter()
    label_set = _label_set(args)
    corpus = load_sources(args.inputs, label_set, "repair")
    text = (
        write_conll(corpus, corpus.source_ids[0])
        if len(corpus.source_ids) == 1
        else write_conll_multi(corpus)
    )
    Path(args.out).write_text(text, encoding="utf-8")
    _emit_manifest(args, "repair", {"out": str(args.out)}, started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labelfuse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"labelfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="fuse source layers into one labelling")
    _add_common(p)
    p.add_argument("--method", default="mv", choices=("mv", "bea", "bea2", "bea-sup"))
    p.add_argument("--granularity", default="token", choices=("token", "entity"))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--gold", help="gold CoNLL file (required for bea-sup)")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write the JSON reliability report here")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("rank", help="score sources against gold and weight the top k")
    _add_common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--out", help="write the weight JSON here instead of stdout")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("distill", help="train the memo tagger on weighted source batches")
    _add_common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--epochs", type=int, default=DEFAULT_DISTILL_EPOCHS)
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    p.add_argument("--tagger-out", help="serialize the trained tagger here")
    p.add_argument("--silver-dir", help="export per-epoch supervision and schedule here")
    p.add_argument("--out", help="write the tagger's predictions on the inputs here")
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("finetune", help="fine-tune a serialized tagger on gold")
    p.add_argument("inputs", nargs="*", help="optional corpus to tag after fine-tuning")
    p.add_argument("--types", default="PER,ORG,LOC")
    p.add_argument("--repair-policy", default="repair", choices=("strict", "repair"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tagger", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--epochs", type=int, default=DEFAULT_FINETUNE_EPOCHS)
    p.add_argument("--tagger-out")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("score", help="entity F1 of a prediction file against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--types", default="PER,ORG,LOC")
    p.add_argument("--repair-policy", default="repair", choices=("strict", "repair"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("simulate", help="sample a synthetic multi-source corpus")
    p.add_argument("--n", type=int, required=True, help="number of instances (tokens)")
    p.add_argument("--h", type=int, required=True, help="number of sources")
    p.add_argument("--k", type=int, required=True, help="number of classes")
    p.add_argument("--diag", type=float, default=0.9)
    p.add_argument("--spammers", type=int, default=0)
    p.add_argument("--adversaries", type=int, default=0)
    p.add_argument("--sentence-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--gold-out")
    p.add_argument("--manifest")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("repair", help="rewrite inputs with scheme violations fixed")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_repair)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
