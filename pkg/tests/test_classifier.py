"""Sector scoring, thresholded prediction, and F1 evaluation."""

import csv

import numpy as np
import pytest

from budgetrank import classifier as clf
from budgetrank import embeddings as emb
from budgetrank import errors
from budgetrank.corpus import Corpus

from util import make_corpus, make_segment, make_taxonomy, naive_f1


def _model(sectors=("A", "B"), dim=2):
    prototypes = np.eye(len(sectors), dim)
    return emb.AdapterModel(tuple(sectors), np.eye(dim), prototypes, 0.07, 42)


# ------------------------------------------------------------ score/predict

def test_score_sectors_taxonomy_order_and_values():
    model = _model()
    out = clf.score_sectors(model, "s1", np.array([1.0, 0.0]))
    assert out.segment_id == "s1"
    assert list(out.scores) == ["A", "B"]
    assert out.scores["A"] == pytest.approx(1.0)
    assert out.scores["B"] == pytest.approx(0.0)


def test_predict_closed_threshold():
    scores = clf.SectorScores("s1", {"A": 0.5, "B": 0.49})
    pred = clf.predict(scores, 0.5)
    assert pred.predicted == frozenset({"A"})
    assert pred.tau == 0.5


def test_predict_tau_outside_unit_range():
    scores = clf.SectorScores("s1", {"A": 0.9, "B": -0.9})
    assert clf.predict(scores, 1.01).predicted == frozenset()
    assert clf.predict(scores, -2.0).predicted == frozenset({"A", "B"})


def test_classify_corpus_order_and_fixture_accuracy(taxonomy, corpus, store):
    model = emb.init_adapter(store, taxonomy)
    results = clf.classify_corpus(model, store, corpus, tau=0.5)
    assert [scores.segment_id for scores, _ in results] == list(corpus.ids())
    labelled = {seg.id: seg.sectors for seg in corpus if seg.sectors}
    for _, pred in results:
        if pred.segment_id in labelled:
            assert pred.predicted == labelled[pred.segment_id], pred.segment_id


# ------------------------------------------------------------- evaluate_f1

def _preds(pairs):
    return [clf.PredictionSet(i, frozenset(p), 0.5) for i, p in pairs]


def test_evaluate_f1_worked_example():
    # Hand enumeration: seg1 contributes TP(A) and FP(B); seg2 contributes
    # TP(A) and FN(B). Pooled TP=2, FP=1, FN=1 -> micro 2.2/(2.2+1+1) = 2/3.
    taxonomy = make_taxonomy(["A", "B"])
    gold = Corpus([make_segment("s1", {"A"}), make_segment("s2", {"A", "B"})])
    preds = _preds([("s1", {"A", "B"}), ("s2", {"A"})])
    report = clf.evaluate_f1(preds, gold, taxonomy)
    assert report.micro == pytest.approx(2 / 3, abs=1e-4)
    assert report.macro == pytest.approx(0.5, abs=1e-4)
    assert report.weighted == pytest.approx(2 / 3, abs=1e-4)
    a, b = report.per_sector["A"], report.per_sector["B"]
    assert (a.precision, a.recall, a.f1, a.support) == (1.0, 1.0, 1.0, 2)
    assert b.f1 == 0.0 and b.support == 1


def test_evaluate_f1_zero_support_sector_counts_in_macro():
    taxonomy = make_taxonomy(["A", "B"])
    gold = Corpus([make_segment("s1", {"A"})])
    report = clf.evaluate_f1(_preds([("s1", {"A"})]), gold, taxonomy)
    assert report.per_sector["B"].f1 == 0.0
    assert report.per_sector["B"].support == 0
    assert report.macro == pytest.approx(0.5)
    assert report.micro == 1.0
    assert report.weighted == 1.0


def test_evaluate_f1_ignores_unlabeled_segments():
    taxonomy = make_taxonomy(["A"])
    gold = Corpus([make_segment("s1", {"A"}), make_segment("u", set())])
    report = clf.evaluate_f1(_preds([("s1", {"A"}), ("u", {"A"})]), gold, taxonomy)
    assert report.micro == 1.0


def test_evaluate_f1_error_paths():
    taxonomy = make_taxonomy(["A"])
    gold = Corpus([make_segment("s1", {"A"})])
    with pytest.raises(errors.DuplicateId):
        clf.evaluate_f1(_preds([("s1", {"A"}), ("s1", {"A"})]), gold, taxonomy)
    with pytest.raises(errors.UnknownSegment):
        clf.evaluate_f1(_preds([("ghost", {"A"})]), gold, taxonomy)
    with pytest.raises(errors.UnknownSector):
        clf.evaluate_f1(_preds([("s1", {"Opium"})]), gold, taxonomy)
    with pytest.raises(errors.MissingPrediction):
        clf.evaluate_f1([], gold, taxonomy)


def test_evaluate_f1_matches_naive_oracle():
    rng = np.random.default_rng(202)
    letters = ["A", "B", "C", "D", "E"]
    for _ in range(200):
        n_sectors = int(rng.integers(1, 6))
        sectors = letters[:n_sectors]
        taxonomy = make_taxonomy(sectors)
        n_segs = int(rng.integers(1, 11))
        gold_by_id, preds_by_id = {}, {}
        segs, preds = [], []
        for i in range(n_segs):
            seg_id = f"s{i}"
            gold = {s for s in sectors if rng.random() < 0.4}
            pred = {s for s in sectors if rng.random() < 0.4}
            segs.append(make_segment(seg_id, gold))
            preds.append(clf.PredictionSet(seg_id, frozenset(pred), 0.5))
            if gold:
                gold_by_id[seg_id] = gold
                preds_by_id[seg_id] = pred
        report = clf.evaluate_f1(preds, Corpus(segs), taxonomy)
        macro, micro, weighted, per = naive_f1(preds_by_id, gold_by_id, sectors)
        assert report.macro == macro
        assert report.micro == micro
        assert report.weighted == weighted
        for s in sectors:
            st = report.per_sector[s]
            assert (st.precision, st.recall, st.f1, st.support) == per[s]


# ------------------------------------------------------------------ writers

def test_write_predictions_default_and_full(tmp_path):
    results = [
        (clf.SectorScores("s1", {"A": 0.9, "B": 0.1}),
         clf.PredictionSet("s1", frozenset({"A"}), 0.5)),
    ]
    p = tmp_path / "pred.csv"
    clf.write_predictions(str(p), results)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["segment_id", "sector", "score", "predicted"]
    assert rows[1:] == [["s1", "A", "0.9", "1"]]

    clf.write_predictions(str(p), results, full=True)
    rows = list(csv.reader(p.open()))
    assert rows[1:] == [["s1", "A", "0.9", "1"], ["s1", "B", "0.1", "0"]]


def test_write_f1_report(tmp_path):
    report = clf.F1Report(0.5, 0.75, 2 / 3, {
        "A": clf.SectorStats(1.0, 1.0, 1.0, 2),
        "B": clf.SectorStats(0.0, 0.0, 0.0, 1),
    })
    p = tmp_path / "f1.csv"
    clf.write_f1_report(str(p), report)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["sector", "precision", "recall", "f1", "support"]
    assert rows[1] == ["A", "1.0", "1.0", "1.0", "2"]
    assert rows[3] == ["MACRO", "", "", "0.5", ""]
    assert rows[4] == ["MICRO", "", "", "0.75", ""]
    assert rows[5][0] == "WEIGHTED"
