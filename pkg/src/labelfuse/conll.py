"""CoNLL-format corpora with multiple prediction layers per sentence.

The on-disk format is token-per-line with whitespace-separated columns and a
blank line after every sentence. The first column is the token, the remaining
columns are tag layers (one per source). Multi-source data is accepted either
as one file per source (filename stem = source id) or as a single file with
one tag column per source. A sentence-long run of ``-`` in a column records
that the source made no prediction for that sentence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

MISSING_MARKER = "-"

RESERVED_LAYERS = ("gold", "aggregate")


class CorpusError(Exception):
    """Base class for corpus data errors."""


class ConllParseError(CorpusError):
    """Structurally malformed CoNLL input (bad column count etc.)."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class LabelError(CorpusError):
    """A tag string outside the declared label space."""


class BioValidationError(CorpusError):
    """A tag sequence violating the IOB2 scheme in strict mode."""

    def __init__(self, message: str, sentence: int, token: int):
        super().__init__(f"sentence {sentence}, token {token}: {message}")
        self.sentence = sentence
        self.token = token


class MissingLayerError(CorpusError):
    """A requested tag layer absent from some sentence."""


@dataclass(frozen=True)
class LabelSet:
    """Entity types plus the tagging scheme that generates the tag space."""

    entity_types: tuple[str, ...]
    scheme: str = "IOB2"

    def __post_init__(self):
        types = tuple(self.entity_types)
        object.__setattr__(self, "entity_types", types)
        if not types:
            raise ValueError("at least one entity type is required")
        if len(set(types)) != len(types):
            raise ValueError(f"duplicate entity types: {types}")
        for t in types:
            if not t or any(c.isspace() for c in t):
                raise ValueError(f"bad entity type name: {t!r}")
        if self.scheme not in ("BIO", "IOB2"):
            raise ValueError(f"unsupported scheme: {self.scheme}")

    @property
    def token_labels(self) -> tuple[str, ...]:
        """The token tag space: O plus B-/I- for each type. Size 2T+1."""
        out = ["O"]
        for t in self.entity_types:
            out.append(f"B-{t}")
            out.append(f"I-{t}")
        return tuple(out)

    @property
    def entity_labels(self) -> tuple[str, ...]:
        """The span label space: O plus each type. Size T+1."""
        return ("O",) + self.entity_types

    def check_tag(self, tag: str) -> None:
        if tag not in self.token_labels:
            raise LabelError(f"unknown tag {tag!r} for entity types {self.entity_types}")


@dataclass(frozen=True)
class Sentence:
    """Tokens with per-source tag layers and optional gold/aggregate layers."""

    tokens: tuple[str, ...]
    tags: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    gold: tuple[str, ...] | None = None
    aggregate: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(
            self, "tags", {src: tuple(seq) for src, seq in self.tags.items()}
        )
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))
        if self.aggregate is not None:
            object.__setattr__(self, "aggregate", tuple(self.aggregate))
        n = len(self.tokens)
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"bad token {tok!r}: empty or contains whitespace")
        for src, seq in self.tags.items():
            if len(seq) != n:
                raise ValueError(f"layer {src!r} has {len(seq)} tags for {n} tokens")
        for name, seq in (("gold", self.gold), ("aggregate", self.aggregate)):
            if seq is not None and len(seq) != n:
                raise ValueError(f"{name} layer has {len(seq)} tags for {n} tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def layer(self, which: str) -> tuple[str, ...] | None:
        if which == "gold":
            return self.gold
        if which == "aggregate":
            return self.aggregate
        return self.tags.get(which)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    label_set: LabelSet
    source_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "source_ids", tuple(self.source_ids))
        if not self.source_ids:
            raise ValueError("a corpus needs at least one source id")
        if len(set(self.source_ids)) != len(self.source_ids):
            raise ValueError(f"duplicate source ids: {self.source_ids}")
        for src in self.source_ids:
            if src in RESERVED_LAYERS:
                raise ValueError(f"source id {src!r} is reserved")
        declared = set(self.source_ids)
        for idx, sent in enumerate(self.sentences):
            extra = set(sent.tags) - declared
            if extra:
                raise ValueError(f"sentence {idx} references undeclared sources {sorted(extra)}")

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def with_aggregate(self, layers: Sequence[Sequence[str]]) -> "Corpus":
        if len(layers) != len(self.sentences):
            raise ValueError("one aggregate layer per sentence required")
        sentences = tuple(
            replace(s, aggregate=tuple(layer)) for s, layer in zip(self.sentences, layers)
        )
        return replace(self, sentences=sentences)

    def with_gold(self, layers: Sequence[Sequence[str]]) -> "Corpus":
        if len(layers) != len(self.sentences):
            raise ValueError("one gold layer per sentence required")
        sentences = tuple(
            replace(s, gold=tuple(layer)) for s, layer in zip(self.sentences, layers)
        )
        return replace(self, sentences=sentences)


def validate_bio(tags: Sequence[str], label_set: LabelSet) -> list[tuple[int, str]]:
    """Return (index, reason) pairs where the sequence breaks IOB2.

    Reasons are ``orphan-I`` (I-X not preceded by an entity tag) and
    ``type-mismatch`` (I-X preceded by an entity tag of another type).
    """
    violations = []
    prev_type = None
    for i, tag in enumerate(tags):
        label_set.check_tag(tag)
        if tag == "O":
            prev_type = None
        elif tag.startswith("B-"):
            prev_type = tag[2:]
        else:  # I-X
            etype = tag[2:]
            if prev_type is None:
                violations.append((i, "orphan-I"))
            elif prev_type != etype:
                violations.append((i, "type-mismatch"))
            prev_type = etype
    return violations


def repair_bio(tags: Sequence[str], label_set: LabelSet) -> tuple[str, ...]:
    """Rewrite orphan or type-mismatched I-X tags as B-X.

    Keeps the entity type the source asserted while forcing a legal span
    start; the result always passes :func:`validate_bio`.
    """
    out: list[str] = []
    prev_type = None
    for tag in tags:
        label_set.check_tag(tag)
        if tag == "O":
            prev_type = None
        elif tag.startswith("B-"):
            prev_type = tag[2:]
        else:
            etype = tag[2:]
            if prev_type != etype:
                tag = f"B-{etype}"
            prev_type = etype
        out.append(tag)
    return tuple(out)


def _close_sentence(
    tokens: list[str],
    columns: list[list[str]],
    source_ids: Sequence[str],
    label_set: LabelSet,
    repair_policy: str,
    sentence_index: int,
) -> Sentence:
    tags: dict[str, tuple[str, ...]] = {}
    for src, column in zip(source_ids, columns):
        missing = [tag == MISSING_MARKER for tag in column]
        if all(missing):
            continue
        if any(missing):
            bad = missing.index(True)
            raise BioValidationError(
                f"layer {src!r} mixes tags and missing markers", sentence_index, bad
            )
        if repair_policy == "repair":
            tags[src] = repair_bio(column, label_set)
        else:
            violations = validate_bio(column, label_set)
            if violations:
                idx, reason = violations[0]
                raise BioValidationError(f"{reason} in layer {src!r}", sentence_index, idx)
            tags[src] = tuple(column)
    return Sentence(tokens=tuple(tokens), tags=tags)


def parse_conll(
    text: str,
    label_set: LabelSet,
    repair_policy: str = "strict",
    source_ids: Sequence[str] | None = None,
) -> Corpus:
    """Parse CoNLL text into a corpus.

    The number of tag columns fixes the number of sources. ``source_ids``
    names them in column order; when omitted, single-column input gets the
    id ``src`` and multi-column input gets ``src1..srcH``.
    """
    if repair_policy not in ("strict", "repair"):
        raise ValueError(f"unknown repair policy: {repair_policy!r}")

    sentences: list[Sentence] = []
    tokens: list[str] = []
    columns: list[list[str]] = []
    width: int | None = None
    ids: tuple[str, ...] | None = tuple(source_ids) if source_ids is not None else None

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            if tokens:
                sentences.append(
                    _close_sentence(
                        tokens, columns, ids, label_set, repair_policy, len(sentences)
                    )
                )
                tokens, columns = [], []
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ConllParseError(f"expected token and at least one tag: {raw!r}", lineno)
        if width is None:
            width = len(fields)
            n_col = width - 1
            if ids is None:
                ids = ("src",) if n_col == 1 else tuple(f"src{i + 1}" for i in range(n_col))
            elif len(ids) != n_col:
                raise ConllParseError(
                    f"{n_col} tag columns but {len(ids)} source ids", lineno
                )
        elif len(fields) != width:
            raise ConllParseError(
                f"expected {width} columns, found {len(fields)}: {raw!r}", lineno
            )
        if not tokens:
            columns = [[] for _ in range(width - 1)]
        tokens.append(fields[0])
        for col, tag in zip(columns, fields[1:]):
            col.append(tag)

    if tokens:
        sentences.append(
            _close_sentence(tokens, columns, ids, label_set, repair_policy, len(sentences))
        )

    if ids is None:
        ids = ("src",)
    return Corpus(sentences=tuple(sentences), label_set=label_set, source_ids=ids)


def write_conll(corpus: Corpus, which: str) -> str:
    """Serialize one tag layer; round-trips byte-exactly through parse_conll."""
    if which not in corpus.source_ids and which not in RESERVED_LAYERS:
        raise MissingLayerError(f"unknown layer {which!r}")
    chunks: list[str] = []
    for idx, sent in enumerate(corpus.sentences):
        layer = sent.layer(which)
        if layer is None:
            raise MissingLayerError(f"sentence {idx} has no {which!r} layer")
        for token, tag in zip(sent.tokens, layer):
            chunks.append(f"{token} {tag}\n")
        chunks.append("\n")
    return "".join(chunks)


def write_conll_multi(corpus: Corpus, layers: Sequence[str] | None = None) -> str:
    """Serialize several layers as columns, with ``-`` for missing sentences."""
    which = tuple(layers) if layers is not None else corpus.source_ids
    chunks: list[str] = []
    for sent in corpus.sentences:
        cols = [sent.layer(src) for src in which]
        for i, token in enumerate(sent.tokens):
            tags = " ".join(MISSING_MARKER if col is None else col[i] for col in cols)
            chunks.append(f"{token} {tags}\n")
        chunks.append("\n")
    return "".join(chunks)


def _merge_token_check(a: Sentence, b: Sentence, idx: int, name: str) -> None:
    if a.tokens != b.tokens:
        raise CorpusError(
            f"sentence {idx}: tokens disagree with layer source {name!r}"
        )


def load_sources(
    paths: Sequence[str | Path],
    label_set: LabelSet,
    repair_policy: str = "strict",
) -> Corpus:
    """Read one corpus from per-source files or a single multi-column file.

    Filename stems name the sources in the per-source form. All files must
    agree on sentence segmentation and tokens.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no input files")
    if len(paths) == 1:
        text = paths[0].read_text(encoding="utf-8")
        probe = parse_conll(text, label_set, repair_policy)
        if len(probe.source_ids) == 1:
            return _rename_single_source(probe, paths[0].stem)
        return probe

    merged: list[Sentence] | None = None
    ids: list[str] = []
    for path in paths:
        part = parse_conll(path.read_text(encoding="utf-8"), label_set, repair_policy)
        if len(part.source_ids) != 1:
            raise CorpusError(f"{path}: expected a single tag column in per-source mode")
        src = path.stem
        ids.append(src)
        if merged is None:
            merged = [
                Sentence(s.tokens, dict(zip((src,), s.tags.values()))) for s in part.sentences
            ]
        else:
            if len(part) != len(merged):
                raise CorpusError(
                    f"{path}: {len(part)} sentences, expected {len(merged)}"
                )
            updated = []
            for idx, (acc, new) in enumerate(zip(merged, part.sentences)):
                _merge_token_check(acc, new, idx, src)
                tags = dict(acc.tags)
                layer = new.tags.get(part.source_ids[0])
                if layer is not None:
                    tags[src] = layer
                updated.append(Sentence(acc.tokens, tags))
            merged = updated
    return Corpus(tuple(merged or ()), label_set, tuple(ids))


def _rename_single_source(corpus: Corpus, new_id: str) -> Corpus:
    old = corpus.source_ids[0]
    if old == new_id:
        return corpus
    sentences = tuple(
        Sentence(s.tokens, {new_id: s.tags[old]} if old in s.tags else {}, s.gold, s.aggregate)
        for s in corpus.sentences
    )
    return Corpus(sentences, corpus.label_set, (new_id,))


def attach_gold(corpus: Corpus, gold: Corpus) -> Corpus:
    """Copy the single layer of ``gold`` onto ``corpus`` as the gold layer."""
    if len(gold.source_ids) != 1:
        raise CorpusError("gold corpus must have exactly one tag column")
    if len(gold) != len(corpus):
        raise CorpusError(
            f"gold corpus has {len(gold)} sentences, expected {len(corpus)}"
        )
    src = gold.source_ids[0]
    layers = []
    for idx, (sent, gsent) in enumerate(zip(corpus.sentences, gold.sentences)):
        _merge_token_check(sent, gsent, idx, "gold")
        layer = gsent.tags.get(src)
        if layer is None:
            raise MissingLayerError(f"gold sentence {idx} has no tags")
        layers.append(layer)
    return corpus.with_gold(layers)
