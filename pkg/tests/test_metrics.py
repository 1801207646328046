import numpy as np
import pytest

from labelfuse.bayes import BeaConfig, run_bea
from labelfuse.metrics import Score, confusion_report, entity_f1, token_accuracy
from labelfuse.simulate import SourceSpec, SynthConfig, generate
from labelfuse.spans import EntitySpan


def spanify(*triples):
    return [EntitySpan(*t) for t in triples]


def test_perfect_match():
    gold = [spanify((0, 2, "PER"))]
    assert entity_f1(gold, gold).f1 == 1.0


def test_no_exact_match_scores_zero():
    pred = [spanify((0, 4, "ORG"))]
    gold = [spanify((1, 4, "PER"))]
    score = entity_f1(pred, gold)
    assert score.tp == 0
    assert score.f1 == 0.0


def test_partial_recall():
    pred = [spanify((1, 4, "PER"))]
    gold = [spanify((1, 4, "PER"), (6, 7, "LOC"))]
    score = entity_f1(pred, gold)
    assert score.precision == 1.0
    assert score.recall == 0.5
    assert score.f1 == pytest.approx(2 / 3)


def test_empty_sides():
    assert entity_f1([[]], [[]]).f1 == 0.0
    assert entity_f1([[]], [spanify((0, 1, "PER"))]).recall == 0.0


def test_symmetry_swaps_precision_recall():
    pred = [spanify((0, 1, "PER"), (3, 5, "ORG"))]
    gold = [spanify((0, 1, "PER"), (6, 7, "LOC"), (8, 9, "LOC"))]
    forward = entity_f1(pred, gold)
    backward = entity_f1(gold, pred)
    assert forward.precision == backward.recall
    assert forward.recall == backward.precision
    assert forward.f1 == pytest.approx(backward.f1)


def test_micro_average_sums_counts():
    pred = [spanify((0, 1, "PER")), spanify((0, 1, "ORG"), (2, 3, "ORG"))]
    gold = [spanify((0, 1, "PER")), spanify((4, 5, "ORG"))]
    score = entity_f1(pred, gold)
    assert (score.tp, score.fp, score.fn) == (1, 2, 1)
    # Micro: from the summed counts, not averaged per-sentence F1s.
    assert score.precision == pytest.approx(1 / 3)
    assert score.recall == pytest.approx(1 / 2)


def test_length_mismatch_raises():
    with pytest.raises(ValueError):
        entity_f1([[]], [[], []])


def test_token_accuracy_basic():
    assert token_accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert token_accuracy(["a", "b"], ["b", "a"]) == 0.0
    assert token_accuracy(list("abcd"), list("abcx")) == 0.75
    with pytest.raises(ValueError):
        token_accuracy(["a"], ["a", "b"])


def test_score_zero_denominators():
    score = Score(tp=0, fp=0, fn=0)
    assert score.precision == 0.0
    assert score.recall == 0.0
    assert score.f1 == 0.0


def test_confusion_report_rows_normalized_and_recall_consistent():
    # Three strong sources make the instance posteriors confident enough to
    # pin each confusion matrix near its generating truth.
    specs = (
        SourceSpec("reliable", diag=0.99),
        SourceSpec("reliable", diag=0.99),
        SourceSpec("reliable", diag=0.99),
        SourceSpec("spammer"),
        SourceSpec("reliable", diag=0.7),
    )
    names = ["good1", "good2", "good3", "noise", "meh"]
    problem = generate(SynthConfig(n=5000, k=4, sources=specs, seed=3))
    posterior = run_bea(problem.matrix, BeaConfig())
    report = confusion_report(posterior, names)
    for j, name in enumerate(names):
        matrix = np.asarray(report["sources"][name]["confusion"])
        assert np.allclose(matrix.sum(axis=1), 1.0, atol=1e-9)
        assert report["sources"][name]["mean_recall"] == pytest.approx(
            float(posterior.mean_recall[j]), abs=0
        )
    good = np.asarray(report["sources"]["good1"]["confusion"])
    assert np.diag(good).min() >= 0.95
    noise = np.asarray(report["sources"]["noise"]["confusion"])
    assert np.abs(noise - 0.25).max() <= 0.05
    assert report["ranking"][0].startswith("good")
    assert report["ranking"][-1] == "noise"


def test_confusion_report_id_count_mismatch():
    problem = generate(
        SynthConfig(n=50, k=2, sources=(SourceSpec("reliable"),), seed=0)
    )
    posterior = run_bea(problem.matrix, BeaConfig())
    with pytest.raises(ValueError):
        confusion_report(posterior, ["a", "b"])
