"""Numpy fallback for the compiled kernels. Same contracts as ``_fast``.

Shapes: Z is the (n, D) matrix of adapter-transformed segment vectors,
P the (S, D) prototype matrix. Gold labels arrive CSR-style: segment i's
gold sector indices are gold_idx[gold_indptr[i]:gold_indptr[i+1]].
The loss is the mean over (segment, gold) pairs of the negative
log-softmax of cosine(Z_i, P_s) / temperature over all S sectors.
"""

from __future__ import annotations

import numpy as np


def _cosines(Z, P):
    zn = np.linalg.norm(Z, axis=1)
    pn = np.linalg.norm(P, axis=1)
    C = (Z @ P.T) / np.outer(zn, pn)
    return C, zn, pn


def _log_softmax(L):
    shifted = L - L.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cosine_softmax_loss(Z, P, gold_indptr, gold_idx, temperature):
    C, _, _ = _cosines(Z, P)
    logq = _log_softmax(C / temperature)
    rows = np.repeat(np.arange(Z.shape[0]), np.diff(gold_indptr))
    return float(-logq[rows, gold_idx].mean())


def cosine_softmax_grad(Z, P, gold_indptr, gold_idx, temperature):
    """Returns (loss, dZ, dP): gradient of the mean pair loss w.r.t. Z and P."""
    n, _ = Z.shape
    m = gold_idx.shape[0]
    C, zn, pn = _cosines(Z, P)
    logq = _log_softmax(C / temperature)
    Q = np.exp(logq)

    counts = np.diff(gold_indptr)
    rows = np.repeat(np.arange(n), counts)
    loss = float(-logq[rows, gold_idx].mean())

    Y = np.zeros_like(C)
    np.add.at(Y, (rows, gold_idx), 1.0)
    A = (counts[:, None] * Q - Y) / (m * temperature)

    # d cos(z,p)/dz = p/(|z||p|) - cos * z/|z|^2 ; symmetric in p.
    B = A / pn[None, :]
    row_dot = (A * C).sum(axis=1)
    dZ = (B @ P) / zn[:, None] - (row_dot / zn**2)[:, None] * Z

    col_dot = (A * C).sum(axis=0)
    dP = ((A / zn[:, None]).T @ Z) / pn[:, None] - (col_dot / pn**2)[:, None] * P
    return loss, dZ, dP


def best_split_sorted(xs, gs):
    """Best SSE-reduction split over a feature column already sorted ascending.

    Candidate thresholds are the distinct values xs[k] with xs[k] < xs[k+1]
    (predicate: x <= threshold goes left). Returns (gain, threshold) where
    gain = S_L^2/n_L + S_R^2/n_R - S^2/n, keeping the lowest threshold on
    ties; returns (-1.0, nan) when no valid boundary exists.
    """
    n = xs.shape[0]
    if n < 2:
        return -1.0, float("nan")
    prefix = np.cumsum(gs)
    total = prefix[-1]
    ks = np.nonzero(xs[:-1] < xs[1:])[0]
    if ks.size == 0:
        return -1.0, float("nan")
    n_left = ks + 1.0
    gains = prefix[ks] ** 2 / n_left + (total - prefix[ks]) ** 2 / (n - n_left) - total**2 / n
    best = int(np.argmax(gains))
    return float(gains[best]), float(xs[ks[best]])
