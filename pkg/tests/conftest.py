import pytest

from labelfuse.conll import Corpus, LabelSet, Sentence

TABLE1_LAYERS = {
    "m1": ("B-ORG", "I-ORG", "I-ORG", "I-ORG"),
    "m2": ("O", "B-ORG", "I-ORG", "I-ORG"),
    "m3": ("O", "O", "B-ORG", "I-ORG"),
    "m4": ("O", "B-PER", "I-PER", "I-PER"),
    "m5": ("O", "B-PER", "I-PER", "I-PER"),
}


@pytest.fixture
def org_per() -> LabelSet:
    return LabelSet(("ORG", "PER"))


@pytest.fixture
def table1(org_per) -> Corpus:
    """The canonical four-token sentence labelled by five disagreeing sources."""
    sent = Sentence(tokens=("w1", "w2", "w3", "w4"), tags=TABLE1_LAYERS)
    return Corpus((sent,), org_per, tuple(sorted(TABLE1_LAYERS)))
