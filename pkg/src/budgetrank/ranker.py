"""Sector-performance rankers over embedding features, plus NDCG.

Feature vectors are per-(event, sector) means of segment embeddings. Models:
a logistic classifier on the up/down label, a ridge regressor on the raw
return, and tree ensembles (boosted with squared / logistic / pairwise
learning-to-rank objectives, or bagged forests). Only the induced order of
scores matters downstream; rank_event and ndcg consume it.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from ._io import atomic_writer
from .corpus import Corpus
from .embeddings import AdapterModel, EmbeddingStore, apply_adapter
from .errors import (
    BadHeader,
    DimensionMismatch,
    Diverged,
    NoPairs,
    NoSegments,
    SectorSetMismatch,
    SingleClass,
)
from .market import GroundTruthRanking
from .trees import Tree, grow_tree, predict_tree, tree_from_dict, tree_to_dict

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RankingInstance:
    budget_date: date
    sector: str
    feature: np.ndarray
    target_return: float

    def __post_init__(self):
        if not np.isfinite(self.feature).all() or not math.isfinite(self.target_return):
            raise ValueError("instance feature and target must be finite")

    @property
    def label_up(self) -> bool:
        return self.target_return > 0


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    l2: float


@dataclass(frozen=True)
class TreeEnsemble:
    trees: tuple[Tree, ...]
    shrinkage: float
    mode: str
    objective: str
    base_score: float
    n_features: int
    max_depth: int


@dataclass(frozen=True)
class RankedList:
    budget_date: date
    ordered: tuple[tuple[str, float], ...]

    def sectors(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.ordered)


@dataclass(frozen=True)
class GdConfig:
    """Full-batch gradient descent settings for the logistic trainer."""

    learning_rate: float = 1.0
    epochs: int = 500
    l2: float = 1e-3

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("learning_rate > 0, epochs >= 1, l2 >= 0 required")


@dataclass(frozen=True)
class EnsembleConfig:
    n_trees: int = 100
    max_depth: int = 3
    shrinkage: float = 0.1
    mode: str = "boosted"
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0:
            raise ValueError("n_trees >= 1 and max_depth >= 0 required")
        if not 0 < self.shrinkage <= 1:
            raise ValueError("shrinkage must be in (0, 1]")
        if self.mode not in ("boosted", "bagged"):
            raise ValueError(f"unknown ensemble mode {self.mode!r}")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def make_features(event: date, sector: str, segments: Corpus, store: EmbeddingStore,
                  adapter: AdapterModel | None = None) -> np.ndarray:
    """Arithmetic mean of the (optionally adapter-transformed) vectors of the
    segments labeled with this sector on this budget date."""
    matched = segments.segments_for(event, sector=sector)
    if not matched:
        raise NoSegments(f"no segments for sector {sector!r} at {event.isoformat()}")
    vectors = [store.vector(seg.id) for seg in matched]
    if adapter is not None:
        vectors = [apply_adapter(adapter, v) for v in vectors]
    return np.mean(vectors, axis=0)


def build_instances(corpus: Corpus, store: EmbeddingStore, returns,
                    adapter: AdapterModel | None = None,
                    on_skip=None) -> list[RankingInstance]:
    """Join sector returns with features; (date, sector) pairs lacking labeled
    segments are skipped via on_skip (or silently)."""
    out = []
    for r in returns:
        try:
            feature = make_features(r.budget_date, r.sector, corpus, store, adapter)
        except NoSegments as exc:
            if on_skip is not None:
                on_skip(exc)
            continue
        out.append(RankingInstance(r.budget_date, r.sector, feature, r.value))
    return out


def _design(instances) -> np.ndarray:
    if len(instances) < 2:
        raise ValueError("need at least 2 instances")
    X = np.stack([inst.feature for inst in instances]).astype(float)
    return X


def logistic_loss_grad(weights, bias, X, y, l2):
    """(loss, dw, db) for mean binary cross-entropy + l2*||w||^2 (bias free)."""
    z = X @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + l2 * np.dot(weights, weights))
    err = _sigmoid(z) - y
    dw = X.T @ err / len(y) + 2.0 * l2 * weights
    db = float(err.mean())
    return loss, dw, db


def train_logistic(instances, config: GdConfig = GdConfig()) -> LogisticModel:
    """Deterministic full-batch descent; the step is halved whenever it would
    raise the loss, so training loss never increases across epochs."""
    X = _design(instances)
    y = np.array([float(inst.label_up) for inst in instances])
    if y.min() == y.max():
        raise SingleClass("all training labels identical; need both classes")

    w = np.zeros(X.shape[1])
    b = 0.0
    lr = config.learning_rate
    loss, dw, db = logistic_loss_grad(w, b, X, y, config.l2)
    for _ in range(config.epochs):
        while True:
            w_new = w - lr * dw
            b_new = b - lr * db
            new_loss, new_dw, new_db = logistic_loss_grad(w_new, b_new, X, y, config.l2)
            if math.isfinite(new_loss) and new_loss <= loss:
                break
            lr *= 0.5
            if lr < 1e-12:
                return LogisticModel(w, b, config.l2)
        w, b, loss, dw, db = w_new, b_new, new_loss, new_dw, new_db
    if not (np.isfinite(w).all() and math.isfinite(b)):
        raise Diverged("logistic training produced non-finite parameters")
    return LogisticModel(w, b, config.l2)


def train_linear(instances, l2: float = 1e-3) -> LinearModel:
    """Ridge regression via normal equations; bias unpenalized, l2 floored at
    1e-8 so the system is never singular."""
    X = _design(instances)
    y = np.array([inst.target_return for inst in instances])
    n, d = X.shape
    l2 = max(l2, 1e-8)
    ones = np.ones((n, 1))
    Xb = np.hstack([X, ones])
    A = Xb.T @ Xb / n
    A[:d, :d] += l2 * np.eye(d)
    theta = np.linalg.solve(A, Xb.T @ y / n)
    return LinearModel(theta[:d], float(theta[d]), l2)


def build_pairs(instances) -> list[tuple[int, int]]:
    """Ordered (winner, loser) index pairs within each budget event; pairs
    with equal target_return are skipped."""
    groups: dict[date, list[int]] = {}
    for i, inst in enumerate(instances):
        groups.setdefault(inst.budget_date, []).append(i)
    pairs = []
    for idx in groups.values():
        for i, j in itertools.combinations(idx, 2):
            a, b = instances[i].target_return, instances[j].target_return
            if a > b:
                pairs.append((i, j))
            elif b > a:
                pairs.append((j, i))
    return pairs


def pairwise_loss_grad(scores, pairs):
    """(loss, dscores) for the mean logistic loss on winner-minus-loser score
    differences."""
    scores = np.asarray(scores, dtype=float)
    winners = np.array([w for w, _ in pairs], dtype=np.int64)
    losers = np.array([l for _, l in pairs], dtype=np.int64)
    diff = scores[winners] - scores[losers]
    m = len(pairs)
    loss = float(np.mean(np.logaddexp(0.0, -diff)))
    g = _sigmoid(-diff) / m
    dscores = np.zeros_like(scores)
    np.add.at(dscores, winners, -g)
    np.add.at(dscores, losers, g)
    return loss, dscores


def train_ensemble(instances, objective: str,
                   config: EnsembleConfig = EnsembleConfig()) -> TreeEnsemble:
    """Boosted trees on the objective's negative gradient, or a bagged forest
    of independent trees on seeded bootstrap resamples."""
    if objective not in ("squared", "logistic", "pairwise"):
        raise ValueError(f"unknown objective {objective!r}")
    X = _design(instances)
    n = X.shape[0]

    if objective == "logistic":
        y = np.array([float(inst.label_up) for inst in instances])
        if y.min() == y.max():
            raise SingleClass("all training labels identical; need both classes")
    else:
        y = np.array([inst.target_return for inst in instances])

    if config.mode == "bagged":
        if objective == "pairwise":
            raise ValueError("pairwise objective requires boosting")
        rng = np.random.default_rng(config.seed)
        trees = []
        for _ in range(config.n_trees):
            rows = rng.integers(0, n, size=n)
            trees.append(grow_tree(X[rows], y[rows], config.max_depth))
        return TreeEnsemble(tuple(trees), 1.0, "bagged", objective, 0.0,
                            X.shape[1], config.max_depth)

    pairs: list[tuple[int, int]] = []
    if objective == "pairwise":
        pairs = build_pairs(instances)
        if not pairs:
            raise NoPairs("no comparable same-event pairs with distinct targets")

    base = float(y.mean()) if objective == "squared" else 0.0
    F = np.full(n, base)
    trees = []
    for _ in range(config.n_trees):
        if objective == "squared":
            residual = y - F
        elif objective == "logistic":
            residual = y - _sigmoid(F)
        else:
            _, grad = pairwise_loss_grad(F, pairs)
            residual = -grad
        tree = grow_tree(X, residual, config.max_depth)
        trees.append(tree)
        F = F + config.shrinkage * predict_tree(tree, X)
    return TreeEnsemble(tuple(trees), config.shrinkage, "boosted", objective, base,
                        X.shape[1], config.max_depth)


def _ensemble_raw(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    contributions = np.zeros(X.shape[0])
    for tree in model.trees:
        contributions += predict_tree(tree, X)
    if model.mode == "bagged":
        return contributions / len(model.trees)
    return model.base_score + model.shrinkage * contributions


def score(model, feature) -> float:
    """Probability for the logistic classifier and boosted-logistic ensemble,
    predicted return for regressors, raw score for pairwise."""
    x = np.asarray(feature, dtype=float)
    if isinstance(model, (LogisticModel, LinearModel)):
        if x.shape != model.weights.shape:
            raise DimensionMismatch(
                f"feature dim {x.shape} does not match model {model.weights.shape}")
        z = float(model.weights @ x + model.bias)
        return float(_sigmoid(z)) if isinstance(model, LogisticModel) else z
    if isinstance(model, TreeEnsemble):
        if x.shape != (model.n_features,):
            raise DimensionMismatch(
                f"feature dim {x.shape} does not match model ({model.n_features},)")
        raw = float(_ensemble_raw(model, x[None, :])[0])
        if model.objective == "logistic" and model.mode == "boosted":
            return float(_sigmoid(raw))
        return raw
    raise TypeError(f"cannot score model of type {type(model).__name__}")


def rank_event(scores: dict[str, float], budget_date: date) -> RankedList:
    """Descending by score, ties broken by ascending sector name."""
    if not scores:
        raise ValueError("no sector scores to rank")
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(budget_date, tuple(ordered))


def ndcg(predicted: RankedList, truth: GroundTruthRanking) -> float:
    """Relevance of the sector at ground-truth position j (0-based) is N - j;
    DCG discounts by log2(position + 2); NDCG = DCG / IDCG."""
    truth_order = truth.sectors()
    pred_order = predicted.sectors()
    if set(truth_order) != set(pred_order) or len(truth_order) != len(pred_order):
        raise SectorSetMismatch(
            f"predicted sectors {sorted(pred_order)} != truth {sorted(truth_order)}")
    n = len(truth_order)
    rel = {s: n - j for j, s in enumerate(truth_order)}
    dcg = sum(rel[s] / math.log2(i + 2) for i, s in enumerate(pred_order))
    idcg = sum((n - j) / math.log2(j + 2) for j in range(n))
    return dcg / idcg


def save_model(model, path: str) -> None:
    if isinstance(model, LogisticModel):
        payload = {"kind": "logistic", "weights": model.weights.tolist(),
                   "bias": model.bias, "l2": model.l2}
    elif isinstance(model, LinearModel):
        payload = {"kind": "linear", "weights": model.weights.tolist(),
                   "bias": model.bias, "l2": model.l2}
    elif isinstance(model, TreeEnsemble):
        payload = {"kind": "ensemble", "trees": [tree_to_dict(t) for t in model.trees],
                   "shrinkage": model.shrinkage, "mode": model.mode,
                   "objective": model.objective, "base_score": model.base_score,
                   "n_features": model.n_features, "max_depth": model.max_depth}
    else:
        raise TypeError(f"cannot save model of type {type(model).__name__}")
    payload["format_version"] = MODEL_FORMAT_VERSION
    with atomic_writer(path) as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path: str):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "logistic":
        return LogisticModel(np.array(payload["weights"], dtype=float),
                             float(payload["bias"]), float(payload["l2"]))
    if kind == "linear":
        return LinearModel(np.array(payload["weights"], dtype=float),
                           float(payload["bias"]), float(payload["l2"]))
    if kind == "ensemble":
        return TreeEnsemble(tuple(tree_from_dict(t) for t in payload["trees"]),
                            float(payload["shrinkage"]), payload["mode"],
                            payload["objective"], float(payload["base_score"]),
                            int(payload["n_features"]), int(payload["max_depth"]))
    raise BadHeader(f"unknown model kind {kind!r} in {path}", path=path)


def write_rankings(path: str, rankings: list[RankedList]) -> None:
    """CSV `date,rank,sector,score`, rank 1-based within each event."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "rank", "sector", "score"])
        for ranking in rankings:
            for i, (sector, value) in enumerate(ranking.ordered, start=1):
                writer.writerow([ranking.budget_date.isoformat(), i, sector,
                                 repr(value)])


def write_ndcg(path: str, per_event: list[tuple[date, float]]) -> None:
    """CSV `date,ndcg` with a final MEAN row."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "ndcg"])
        for day, value in per_event:
            writer.writerow([day.isoformat(), repr(value)])
        mean = float(np.mean([v for _, v in per_event])) if per_event else 0.0
        writer.writerow(["MEAN", repr(mean)])
