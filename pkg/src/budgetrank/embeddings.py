"""Embedding store and the trainable linear adapter over frozen base vectors.

EMBV1 file format: first line ``EMBV1 <dim>``; every following line
``id<TAB>v1 v2 ... vD`` (decimal floats, ``.`` radix, LF endings, UTF-8 ids).
Rows whose id starts with ``sector::`` are sector-name prototypes.

The adapter is a D x D linear map W plus one learnable prototype per sector.
Training pulls transformed segment vectors toward their gold sectors'
prototypes and away from the rest with a temperature-scaled softmax over
cosine similarities, the geometry the classifier operates on.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from ._io import atomic_writer
from .corpus import Corpus, OnError, SectorTaxonomy, normalize_name
from .errors import (
    BadHeader,
    DimensionMismatch,
    DuplicateId,
    EmptyBatch,
    MalformedRow,
    MissingSectorVector,
    MissingVector,
    NonFiniteValue,
    TrainingDiverged,
    UnknownSector,
    ZeroNorm,
)

log = logging.getLogger(__name__)

SECTOR_PREFIX = "sector::"

Batch = Sequence[tuple[np.ndarray, Iterable[str]]]


@dataclass(frozen=True)
class EmbeddingStore:
    """Fixed base vectors for segment ids and sector names, one dimension store-wide."""

    dim: int
    segments: dict[str, np.ndarray]
    sector_names: dict[str, np.ndarray]

    def vector(self, segment_id: str) -> np.ndarray:
        try:
            return self.segments[segment_id]
        except KeyError:
            raise MissingVector(f"no embedding for segment {segment_id!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    l2: float = 1e-3
    seed: int = 42

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True)
class AdapterModel:
    """Linear map W plus per-sector prototypes; scoring uses cosine(W v, prototype)."""

    sectors: tuple[str, ...]
    W: np.ndarray
    prototypes: np.ndarray
    temperature: float
    seed: int

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not np.isfinite(self.W).all() or not np.isfinite(self.prototypes).all():
            raise ValueError("adapter parameters must be finite")
        if self.prototypes.shape != (len(self.sectors), self.W.shape[0]):
            raise ValueError("prototype matrix shape inconsistent with sectors and W")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def prototype_for(self, name: str) -> np.ndarray:
        return self.prototypes[self.sectors.index(name)]


def load_store(path: str, on_error: OnError = None) -> EmbeddingStore:
    """Parse an EMBV1 file. Zero-norm vectors are hard errors, not skipped silently."""
    segments: dict[str, np.ndarray] = {}
    sector_names: dict[str, np.ndarray] = {}
    seen: set[str] = set()

    def report(err):
        if on_error is None:
            raise err
        on_error(err)

    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2 or parts[0] != "EMBV1" or not parts[1].isdigit() or int(parts[1]) < 1:
            err = BadHeader(f"expected 'EMBV1 <dim>', got {header!r}", path=path, line=1)
            report(err)
            return EmbeddingStore(0, {}, {})
        dim = int(parts[1])
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            vec_id, tab, payload = line.partition("\t")
            if not tab or not vec_id:
                report(MalformedRow("expected 'id<TAB>values'", path=path, line=lineno))
                continue
            tokens = payload.split()
            if len(tokens) != dim:
                report(DimensionMismatch(
                    f"{path}:{lineno}: expected {dim} values, got {len(tokens)}"))
                continue
            try:
                values = np.array([float(t) for t in tokens])
            except ValueError:
                report(MalformedRow("unparseable float value", path=path, line=lineno))
                continue
            if not np.isfinite(values).all():
                report(NonFiniteValue("non-finite embedding value", path=path, line=lineno))
                continue
            if not np.linalg.norm(values):
                report(ZeroNorm(f"{path}:{lineno}: zero-norm vector {vec_id!r}"))
                continue
            if vec_id in seen:
                report(DuplicateId(f"id {vec_id!r} already seen", path=path, line=lineno))
                continue
            seen.add(vec_id)
            values.setflags(write=False)
            if vec_id.startswith(SECTOR_PREFIX):
                sector_names[normalize_name(vec_id[len(SECTOR_PREFIX):])] = values
            else:
                segments[vec_id] = values
    return EmbeddingStore(dim, segments, sector_names)


def cosine(a, b) -> float:
    """Cosine similarity clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dims differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine undefined for zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def init_adapter(store: EmbeddingStore, taxonomy: SectorTaxonomy,
                 temperature: float = 0.07, seed: int = 42) -> AdapterModel:
    """Identity map with prototypes copied from the sector-name vectors."""
    missing = [s for s in taxonomy.sectors if s not in store.sector_names]
    if missing:
        raise MissingSectorVector(f"no 'sector::' vector for: {', '.join(missing)}")
    prototypes = np.stack([store.sector_names[s] for s in taxonomy.sectors]).astype(float)
    return AdapterModel(tuple(taxonomy.sectors), np.eye(store.dim), prototypes,
                        temperature, seed)


def apply_adapter(model: AdapterModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (model.dim,):
        raise DimensionMismatch(f"expected dim {model.dim}, got {v.shape}")
    return model.W @ v


def _batch_arrays(model: AdapterModel, batch: Batch):
    if len(batch) == 0:
        raise EmptyBatch("adapter batch is empty")
    index = {name: i for i, name in enumerate(model.sectors)}
    V = np.ascontiguousarray([np.asarray(v, dtype=float) for v, _ in batch])
    if V.shape[1] != model.dim:
        raise DimensionMismatch(f"batch vectors have dim {V.shape[1]}, model {model.dim}")
    indptr = [0]
    gold: list[int] = []
    for _, names in batch:
        # Sorted so pair accumulation order never depends on set iteration
        # order, which is hash-randomized across processes.
        names = sorted(names)
        if not names:
            raise EmptyBatch("gold sector set is empty for a batch item")
        for name in names:
            if name not in index:
                raise UnknownSector(f"unknown sector {name!r} in batch")
            gold.append(index[name])
        indptr.append(len(gold))
    return V, np.asarray(indptr, dtype=np.int64), np.asarray(gold, dtype=np.int64)


def _transformed(model: AdapterModel, V: np.ndarray) -> np.ndarray:
    Z = np.ascontiguousarray(V @ model.W.T)
    if not np.linalg.norm(Z, axis=1).all():
        raise ZeroNorm("adapter maps a batch vector to zero norm")
    return Z


def _identity_penalty(model: AdapterModel, l2: float) -> float:
    if l2 == 0.0:
        return 0.0
    diff = model.W - np.eye(model.dim)
    return l2 * float((diff * diff).sum())


def adapter_loss(model: AdapterModel, batch: Batch, l2: float = 0.0) -> float:
    """Mean over (segment, gold) pairs of -log softmax_gold over all sectors,
    of cosine(W v, prototype)/temperature, plus l2 * ||W - I||_F^2."""
    V, indptr, gold = _batch_arrays(model, batch)
    Z = _transformed(model, V)
    P = np.ascontiguousarray(model.prototypes)
    data = _kernels.cosine_softmax_loss(Z, P, indptr, gold, model.temperature)
    return data + _identity_penalty(model, l2)


def adapter_grad(model: AdapterModel, batch: Batch, l2: float = 0.0):
    """Gradient of adapter_loss w.r.t. (W, prototypes); shapes match the model."""
    V, indptr, gold = _batch_arrays(model, batch)
    Z = _transformed(model, V)
    P = np.ascontiguousarray(model.prototypes)
    _, dZ, dP = _kernels.cosine_softmax_grad(Z, P, indptr, gold, model.temperature)
    dW = dZ.T @ V
    if l2 > 0.0:
        dW += 2.0 * l2 * (model.W - np.eye(model.dim))
    return dW, dP


def make_batch(corpus: Corpus, store: EmbeddingStore) -> list[tuple[np.ndarray, frozenset[str]]]:
    """(vector, gold labels) pairs for every labeled segment, in corpus order.

    Unlabeled segments are skipped: the contrastive objective needs gold
    sectors. Raises MissingVector when a labeled segment has no embedding.
    """
    batch = []
    for seg in corpus:
        if not seg.sectors:
            continue
        batch.append((store.vector(seg.id), seg.sectors))
    return batch


def train_adapter(model: AdapterModel, corpus: Corpus, store: EmbeddingStore,
                  config: TrainConfig) -> AdapterModel:
    """Plain mini-batch gradient descent on the adapter objective.

    Shuffling is seeded by config.seed, so identical (seed, config, inputs)
    reproduce the returned model bit for bit. Raises TrainingDiverged when
    the final training-set loss exceeds the initial one or goes non-finite.
    """
    examples = make_batch(corpus, store)
    if not examples:
        raise EmptyBatch("no labeled segments to train on")

    W = model.W.copy()
    P = model.prototypes.copy()
    current = AdapterModel(model.sectors, W, P, model.temperature, config.seed)
    initial = adapter_loss(current, examples, config.l2)

    rng = np.random.default_rng(config.seed)
    n = len(examples)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            chunk = [examples[i] for i in order[start:start + config.batch_size]]
            dW, dP = adapter_grad(current, chunk, config.l2)
            W = W - config.learning_rate * dW
            P = P - config.learning_rate * dP
            if not (np.isfinite(W).all() and np.isfinite(P).all()):
                raise TrainingDiverged(f"non-finite parameters at epoch {epoch + 1}")
            current = AdapterModel(model.sectors, W, P, model.temperature, config.seed)
        epoch_loss = adapter_loss(current, examples, config.l2)
        log.debug("epoch %d/%d training loss %.6f", epoch + 1, config.epochs, epoch_loss)

    final = adapter_loss(current, examples, config.l2)
    if not math.isfinite(final) or final > initial:
        raise TrainingDiverged(
            f"training loss rose from {initial:.6f} to {final:.6f}; lower the learning rate")
    return current


def save_adapter(model: AdapterModel, path: str) -> None:
    payload = {
        "format_version": 1,
        "kind": "adapter",
        "temperature": model.temperature,
        "seed": model.seed,
        "sectors": list(model.sectors),
        "W": model.W.tolist(),
        "prototypes": model.prototypes.tolist(),
    }
    with atomic_writer(path) as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_adapter(path: str) -> AdapterModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("kind") != "adapter":
        raise BadHeader(f"not an adapter model file: {path}", path=path)
    return AdapterModel(
        tuple(payload["sectors"]),
        np.array(payload["W"], dtype=float),
        np.array(payload["prototypes"], dtype=float),
        float(payload["temperature"]),
        int(payload["seed"]),
    )
