"""Multi-label sector identification and F1 evaluation.

A segment is scored against every sector prototype with cosine similarity in
adapter space; sectors at or above the threshold tau form the prediction set.
Base (untrained) scoring is just the identity adapter over sector-name
vectors, so one code path covers both modes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from ._io import atomic_writer
from .corpus import Corpus, SectorTaxonomy
from .embeddings import AdapterModel, EmbeddingStore, apply_adapter, cosine
from .errors import DuplicateId, MissingPrediction, UnknownSector, UnknownSegment


@dataclass(frozen=True)
class SectorScores:
    """Similarity of one segment to every taxonomy sector, in taxonomy order."""

    segment_id: str
    scores: dict[str, float]


@dataclass(frozen=True)
class PredictionSet:
    segment_id: str
    predicted: frozenset[str]
    tau: float


@dataclass(frozen=True)
class SectorStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class F1Report:
    macro: float
    micro: float
    weighted: float
    per_sector: dict[str, SectorStats]


def score_sectors(model: AdapterModel, segment_id: str, vector) -> SectorScores:
    z = apply_adapter(model, vector)
    scores = {s: cosine(z, model.prototypes[i]) for i, s in enumerate(model.sectors)}
    return SectorScores(segment_id, scores)


def predict(scores: SectorScores, tau: float) -> PredictionSet:
    """Closed threshold: a score exactly equal to tau is predicted.

    tau is not clamped; values outside [-1, 1] legitimately yield all-or-empty
    sets (tau above 1 is the standard way to ask for no predictions).
    """
    chosen = frozenset(s for s, v in scores.scores.items() if v >= tau)
    return PredictionSet(scores.segment_id, chosen, tau)


def classify_corpus(model: AdapterModel, store: EmbeddingStore, corpus: Corpus,
                    tau: float) -> list[tuple[SectorScores, PredictionSet]]:
    out = []
    for seg in corpus:
        scores = score_sectors(model, seg.id, store.vector(seg.id))
        out.append((scores, predict(scores, tau)))
    return out


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def evaluate_f1(predictions: list[PredictionSet], gold: Corpus,
                taxonomy: SectorTaxonomy) -> F1Report:
    """Per-sector, macro, micro, and support-weighted F1.

    Every labeled segment in the corpus needs exactly one prediction set;
    predictions for unlabeled segments are ignored (they have no gold to
    compare against). Zero-support sectors count as f1 = 0 in the macro mean.
    """
    by_id: dict[str, PredictionSet] = {}
    for pred in predictions:
        if pred.segment_id in by_id:
            raise DuplicateId(f"two prediction sets for segment {pred.segment_id!r}")
        by_id[pred.segment_id] = pred

    ids = set(gold.ids())
    for seg_id, pred in by_id.items():
        if seg_id not in ids:
            raise UnknownSegment(f"prediction for unknown segment {seg_id!r}")
        for s in pred.predicted:
            if s not in taxonomy:
                raise UnknownSector(f"predicted sector {s!r} not in taxonomy")

    tp = {s: 0 for s in taxonomy.sectors}
    fp = dict(tp)
    fn = dict(tp)
    for seg in gold:
        if not seg.sectors:
            continue
        if seg.id not in by_id:
            raise MissingPrediction(f"no prediction for labeled segment {seg.id!r}")
        predicted = by_id[seg.id].predicted
        for s in predicted & seg.sectors:
            tp[s] += 1
        for s in predicted - seg.sectors:
            fp[s] += 1
        for s in seg.sectors - predicted:
            fn[s] += 1

    per_sector: dict[str, SectorStats] = {}
    for s in taxonomy.sectors:
        precision = _safe_div(tp[s], tp[s] + fp[s])
        recall = _safe_div(tp[s], tp[s] + fn[s])
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_sector[s] = SectorStats(precision, recall, f1, tp[s] + fn[s])

    macro = _safe_div(sum(st.f1 for st in per_sector.values()), len(per_sector))
    pooled_tp = sum(tp.values())
    micro = _safe_div(2 * pooled_tp, 2 * pooled_tp + sum(fp.values()) + sum(fn.values()))
    total_support = sum(st.support for st in per_sector.values())
    weighted = _safe_div(sum(st.f1 * st.support for st in per_sector.values()),
                         total_support)
    return F1Report(macro, micro, weighted, per_sector)


def write_predictions(path: str, results: list[tuple[SectorScores, PredictionSet]],
                      full: bool = False) -> None:
    """CSV `segment_id,sector,score,predicted`, taxonomy order within segment.

    Default emits only predicted rows; full mode emits every sector per
    segment with the predicted flag.
    """
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id", "sector", "score", "predicted"])
        for scores, pred in results:
            for sector, value in scores.scores.items():
                hit = sector in pred.predicted
                if full or hit:
                    writer.writerow([scores.segment_id, sector, repr(value),
                                     "1" if hit else "0"])


def write_f1_report(path: str, report: F1Report) -> None:
    """Per-sector rows plus MACRO/MICRO/WEIGHTED summary rows (f1 column only)."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sector", "precision", "recall", "f1", "support"])
        for sector, st in report.per_sector.items():
            writer.writerow([sector, repr(st.precision), repr(st.recall),
                             repr(st.f1), st.support])
        writer.writerow(["MACRO", "", "", repr(report.macro), ""])
        writer.writerow(["MICRO", "", "", repr(report.micro), ""])
        writer.writerow(["WEIGHTED", "", "", repr(report.weighted), ""])
