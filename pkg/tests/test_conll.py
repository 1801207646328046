import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelfuse.conll import (
    BioValidationError,
    ConllParseError,
    Corpus,
    LabelError,
    LabelSet,
    MissingLayerError,
    Sentence,
    parse_conll,
    repair_bio,
    validate_bio,
    write_conll,
    write_conll_multi,
)


def test_parse_single_sentence(org_per):
    corpus = parse_conll("EU B-ORG\nrejects O\n\n", org_per)
    assert len(corpus) == 1
    sent = corpus.sentences[0]
    assert sent.tokens == ("EU", "rejects")
    assert sent.tags["src"] == ("B-ORG", "O")


def test_parse_empty_text(org_per):
    corpus = parse_conll("", org_per)
    assert len(corpus) == 0


def test_parse_repairs_orphan_i(org_per):
    corpus = parse_conll("w1 I-ORG\n\n", org_per, repair_policy="repair")
    assert corpus.sentences[0].tags["src"] == ("B-ORG",)


def test_parse_strict_rejects_orphan_i(org_per):
    with pytest.raises(BioValidationError) as err:
        parse_conll("w1 I-ORG\n\n", org_per, repair_policy="strict")
    assert "sentence 0, token 0" in str(err.value)


def test_parse_bad_column_count_reports_line(org_per):
    with pytest.raises(ConllParseError) as err:
        parse_conll("a O\nb O extra\n\n", org_per)
    assert err.value.line_number == 2


def test_parse_unknown_tag_is_label_error(org_per):
    with pytest.raises(LabelError):
        parse_conll("a B-LOC\n\n", org_per)


def test_parse_multi_column_and_missing(org_per):
    text = "a B-ORG -\nb I-ORG -\n\nc O B-PER\n\n"
    corpus = parse_conll(text, org_per, source_ids=("x", "y"))
    assert corpus.source_ids == ("x", "y")
    first, second = corpus.sentences
    assert "y" not in first.tags
    assert first.tags["x"] == ("B-ORG", "I-ORG")
    assert second.tags["y"] == ("B-PER",)


def test_parse_rejects_partial_missing(org_per):
    with pytest.raises(BioValidationError):
        parse_conll("a B-ORG -\nb I-ORG O\n\n", org_per, source_ids=("x", "y"))


@pytest.mark.parametrize(
    "tags,expected",
    [
        (["B-ORG", "I-ORG"], []),
        (["O", "I-PER"], [(1, "orphan-I")]),
        (["B-PER", "I-ORG"], [(1, "type-mismatch")]),
        (["I-ORG"], [(0, "orphan-I")]),
        (["O", "O"], []),
    ],
)
def test_validate_bio_cases(org_per, tags, expected):
    assert validate_bio(tags, org_per) == expected


def test_write_round_trip_example(org_per):
    corpus = parse_conll("EU B-ORG\nrejects O\n\n", org_per)
    assert write_conll(corpus, "src") == "EU B-ORG\nrejects O\n\n"


def test_write_empty_corpus(org_per):
    corpus = Corpus((), org_per, ("src",))
    assert write_conll(corpus, "src") == ""


def test_write_missing_layer_names_sentence(org_per):
    sents = (
        Sentence(("a",), {"x": ("O",)}),
        Sentence(("b",), {}),
    )
    corpus = Corpus(sents, org_per, ("x",))
    with pytest.raises(MissingLayerError) as err:
        write_conll(corpus, "x")
    assert "sentence 1" in str(err.value)


def test_label_set_space(org_per):
    assert org_per.token_labels == ("O", "B-ORG", "I-ORG", "B-PER", "I-PER")
    assert len(org_per.token_labels) == 2 * len(org_per.entity_types) + 1
    assert org_per.entity_labels == ("O", "ORG", "PER")


def test_label_set_rejects_duplicates():
    with pytest.raises(ValueError):
        LabelSet(("PER", "PER"))


def test_sentence_rejects_length_mismatch():
    with pytest.raises(ValueError):
        Sentence(("a", "b"), {"x": ("O",)})


def test_corpus_rejects_undeclared_source(org_per):
    with pytest.raises(ValueError):
        Corpus((Sentence(("a",), {"ghost": ("O",)}),), org_per, ("x",))


# -- property tests ----------------------------------------------------------

TYPES = ("ORG", "PER")
LABELS = LabelSet(TYPES)
ALL_TAGS = LABELS.token_labels

tokens_st = st.text(alphabet="abcxyz019", min_size=1, max_size=5)


@st.composite
def valid_tag_rows(draw, max_len=8):
    n = draw(st.integers(min_value=1, max_value=max_len))
    raw = draw(st.lists(st.sampled_from(ALL_TAGS), min_size=n, max_size=n))
    return list(repair_bio(raw, LABELS))


@st.composite
def corpora(draw):
    n_sources = draw(st.integers(min_value=1, max_value=3))
    source_ids = tuple(f"s{j}" for j in range(n_sources))
    n_sent = draw(st.integers(min_value=0, max_value=4))
    sentences = []
    for _ in range(n_sent):
        length = draw(st.integers(min_value=1, max_value=6))
        toks = tuple(draw(tokens_st) for _ in range(length))
        tags = {}
        for src in source_ids:
            if draw(st.booleans()):
                raw = draw(st.lists(st.sampled_from(ALL_TAGS), min_size=length, max_size=length))
                tags[src] = repair_bio(raw, LABELS)
        sentences.append(Sentence(toks, tags))
    return Corpus(tuple(sentences), LABELS, source_ids)


@given(corpora())
@settings(max_examples=100, deadline=None)
def test_multi_write_parse_identity(corpus):
    text = write_conll_multi(corpus)
    back = parse_conll(text, LABELS, source_ids=corpus.source_ids)
    # Sentences whose tokens exist survive; layers and tokens must match.
    assert len(back) == len(corpus)
    for a, b in zip(corpus.sentences, back.sentences):
        assert a.tokens == b.tokens
        assert a.tags == b.tags
    assert write_conll_multi(back) == text


@given(st.lists(st.sampled_from(ALL_TAGS), min_size=1, max_size=12))
@settings(max_examples=200, deadline=None)
def test_repair_always_validates(tags):
    assert validate_bio(repair_bio(tags, LABELS), LABELS) == []


_CHAR = {"O": "o", "B-ORG": "b", "I-ORG": "i", "B-PER": "c", "I-PER": "j"}
_VALID_RE = re.compile(r"^(?:o|bi*|cj*)*$")


@given(st.lists(st.sampled_from(ALL_TAGS), min_size=0, max_size=12))
@settings(max_examples=300, deadline=None)
def test_validate_bio_matches_regex_oracle(tags):
    encoded = "".join(_CHAR[t] for t in tags)
    violations = validate_bio(tags, LABELS)
    assert (violations == []) == bool(_VALID_RE.match(encoded))
    # An independent per-index predicate pins the exact indices.
    expected = [
        i
        for i, tag in enumerate(tags)
        if tag.startswith("I-")
        and (i == 0 or tags[i - 1] not in (f"B-{tag[2:]}", f"I-{tag[2:]}"))
    ]
    assert [i for i, _ in violations] == expected
