"""Axis-aligned binary regression trees stored as flat parallel arrays.

Split search is an exact greedy scan over sorted feature columns (the hot
kernel), maximizing the sum-of-squares reduction S_L^2/n_L + S_R^2/n_R -
S^2/n. Ties go to the lowest feature index, then the lowest threshold, so
growth is deterministic for a given input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Tree:
    """feature[i] == -1 marks a leaf; rows x with x[f] <= threshold go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int) -> Tree:
    """Fit one tree to (X, y) with squared-error leaves (mean of targets)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        if depth >= max_depth or idx.size < 2:
            return node
        best_gain, best_feat, best_thr = MIN_GAIN, -1, math.nan
        for j in range(X.shape[1]):
            order = np.argsort(X[idx, j], kind="stable")
            xs = np.ascontiguousarray(X[idx[order], j])
            gs = np.ascontiguousarray(y[idx[order]])
            gain, thr = _kernels.best_split_sorted(xs, gs)
            if gain > best_gain:
                best_gain, best_feat, best_thr = gain, j, thr
        if best_feat < 0:
            return node
        go_left = X[idx, best_feat] <= best_thr
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(y.shape[0]), 0)
    return Tree(np.array(feature, dtype=np.int64),
                np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64),
                np.array(value, dtype=float))


def predict_tree(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Vectorized root-to-leaf walk for a batch of rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    idx = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feats = tree.feature[idx]
        active = np.nonzero(feats >= 0)[0]
        if active.size == 0:
            return tree.value[idx]
        nodes = idx[active]
        go_left = X[active, tree.feature[nodes]] <= tree.threshold[nodes]
        idx[active] = np.where(go_left, tree.left[nodes], tree.right[nodes])


def tree_depth(tree: Tree) -> int:
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    for node in range(tree.n_nodes):
        if tree.feature[node] >= 0:
            depth[tree.left[node]] = depth[node] + 1
            depth[tree.right[node]] = depth[node] + 1
    return int(depth.max()) if tree.n_nodes else 0


def tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": [None if math.isnan(t) else t for t in tree.threshold],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def tree_from_dict(data: dict) -> Tree:
    return Tree(np.array(data["feature"], dtype=np.int64),
                np.array([math.nan if t is None else t for t in data["threshold"]],
                         dtype=float),
                np.array(data["left"], dtype=np.int64),
                np.array(data["right"], dtype=np.int64),
                np.array(data["value"], dtype=float))
