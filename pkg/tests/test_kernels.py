"""Cross-backend agreement between the compiled and pure kernels.

Every property here is checked against the pure-numpy implementation (and,
for the split scan, a quadratic scalar oracle in test_trees). When the
compiled extension is unavailable these tests reduce to pure-vs-pure, which
is still a meaningful exactness check of the contracts.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

import budgetrank
from budgetrank import _kernels
from budgetrank._kernels import pure


def _random_problem(rng, n=None, S=None, D=None):
    n = n or int(rng.integers(1, 9))
    S = S or int(rng.integers(1, 7))
    D = D or int(rng.integers(1, 6))
    Z = rng.normal(size=(n, D)) + 0.1
    P = rng.normal(size=(S, D)) + 0.1
    indptr = [0]
    gold = []
    for _ in range(n):
        k = int(rng.integers(1, S + 1))
        gold.extend(sorted(rng.choice(S, size=k, replace=False)))
        indptr.append(len(gold))
    T = float(rng.uniform(0.05, 1.0))
    return (np.ascontiguousarray(Z), np.ascontiguousarray(P),
            np.asarray(indptr, dtype=np.int64), np.asarray(gold, dtype=np.int64), T)


def test_backend_reported():
    assert budgetrank.BACKEND in ("compiled", "pure")
    assert _kernels.BACKEND == budgetrank.BACKEND


def test_pure_env_override_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "import budgetrank; print(budgetrank.BACKEND)"],
        capture_output=True, text=True, check=True,
        env={"PATH": "/usr/bin:/bin", "BUDGETRANK_PURE_KERNELS": "1"})
    assert out.stdout.strip() == "pure"


def test_loss_agrees_across_backends():
    rng = np.random.default_rng(100)
    for _ in range(200):
        Z, P, indptr, gold, T = _random_problem(rng)
        a = _kernels.cosine_softmax_loss(Z, P, indptr, gold, T)
        b = pure.cosine_softmax_loss(Z, P, indptr, gold, T)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_grad_agrees_across_backends():
    rng = np.random.default_rng(101)
    for _ in range(200):
        Z, P, indptr, gold, T = _random_problem(rng)
        la, dZa, dPa = _kernels.cosine_softmax_grad(Z, P, indptr, gold, T)
        lb, dZb, dPb = pure.cosine_softmax_grad(Z, P, indptr, gold, T)
        assert la == pytest.approx(lb, rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(dZa, dZb, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(dPa, dPb, rtol=1e-10, atol=1e-12)


def test_grad_loss_matches_loss_kernel():
    rng = np.random.default_rng(102)
    Z, P, indptr, gold, T = _random_problem(rng, n=6, S=5, D=4)
    loss, _, _ = _kernels.cosine_softmax_grad(Z, P, indptr, gold, T)
    assert loss == pytest.approx(_kernels.cosine_softmax_loss(Z, P, indptr, gold, T),
                                 rel=1e-12)


def test_split_agrees_across_backends():
    rng = np.random.default_rng(103)
    for _ in range(300):
        n = int(rng.integers(1, 40))
        # Coarse grid of values so ties and repeats are common.
        xs = np.sort(rng.choice(np.linspace(-1, 1, 7), size=n))
        gs = rng.normal(size=n)
        ga, ta = _kernels.best_split_sorted(np.ascontiguousarray(xs),
                                            np.ascontiguousarray(gs))
        gb, tb = pure.best_split_sorted(xs, gs)
        assert ga == pytest.approx(gb, rel=1e-12, abs=1e-12)
        assert (math.isnan(ta) and math.isnan(tb)) or ta == tb


def test_split_no_boundary_sentinel():
    for xs in ([], [1.0], [2.0, 2.0, 2.0]):
        arr = np.asarray(xs, dtype=float)
        gain, thr = _kernels.best_split_sorted(arr, np.ones_like(arr))
        assert gain == -1.0
        assert math.isnan(thr)


def test_split_prefers_lowest_threshold_on_ties():
    # Symmetric targets: both boundaries give identical gain; lowest wins.
    xs = np.array([0.0, 1.0, 2.0])
    gs = np.array([1.0, 0.0, 1.0])
    for impl in (_kernels, pure):
        gain, thr = impl.best_split_sorted(xs, gs)
        assert thr == 0.0
        assert gain == pytest.approx(1.0 / 1 + 1.0 / 2 - 4.0 / 3)
