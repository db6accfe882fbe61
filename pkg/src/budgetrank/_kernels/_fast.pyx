# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: softmax-cosine adapter objective and greedy split scan.

Contracts mirror budgetrank._kernels.pure; see that module for the shapes
and the loss definition. The large matrix products go through numpy (BLAS);
the win over the fallback comes from fusing the normalization, softmax,
gold-label scatter, and correction terms into single passes with no
intermediate n-by-S temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, exp, log, sqrt

cnp.import_array()


cdef void _row_norms(const double[:, ::1] M, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, d
    cdef double acc
    for i in range(M.shape[0]):
        acc = 0.0
        for d in range(M.shape[1]):
            acc += M[i, d] * M[i, d]
        out[i] = sqrt(acc)


def cosine_softmax_loss(Z, P, const cnp.int64_t[::1] gold_indptr,
                        const cnp.int64_t[::1] gold_idx,
                        double temperature):
    Z_arr = np.ascontiguousarray(Z, dtype=np.float64)
    P_arr = np.ascontiguousarray(P, dtype=np.float64)
    G_arr = np.dot(Z_arr, P_arr.T)

    cdef double[:, ::1] Zv = Z_arr, Pv = P_arr, G = G_arr
    cdef Py_ssize_t n = Zv.shape[0], S = Pv.shape[0]
    cdef Py_ssize_t m = gold_idx.shape[0]
    cdef double[::1] zn = np.empty(n), pn = np.empty(S)
    cdef Py_ssize_t i, s, j
    cdef double c, maxl, sumexp, logz, inv, loss = 0.0

    _row_norms(Zv, zn)
    _row_norms(Pv, pn)
    for i in range(n):
        inv = 1.0 / (zn[i] * temperature)
        maxl = -1e300
        for s in range(S):
            c = G[i, s] * inv / pn[s]
            G[i, s] = c
            if c > maxl:
                maxl = c
        sumexp = 0.0
        for s in range(S):
            sumexp += exp(G[i, s] - maxl)
        logz = log(sumexp) + maxl
        for j in range(gold_indptr[i], gold_indptr[i + 1]):
            loss += logz - G[i, gold_idx[j]]
    return loss / m


def cosine_softmax_grad(Z, P, const cnp.int64_t[::1] gold_indptr,
                        const cnp.int64_t[::1] gold_idx,
                        double temperature):
    """Returns (loss, dZ, dP): gradient of the mean pair loss w.r.t. Z and P."""
    Z_arr = np.ascontiguousarray(Z, dtype=np.float64)
    P_arr = np.ascontiguousarray(P, dtype=np.float64)
    G_arr = np.dot(Z_arr, P_arr.T)

    cdef double[:, ::1] Zv = Z_arr, Pv = P_arr, G = G_arr
    cdef Py_ssize_t n = Zv.shape[0], S = Pv.shape[0], D = Zv.shape[1]
    cdef Py_ssize_t m = gold_idx.shape[0]
    cdef double[::1] zn = np.empty(n), pn = np.empty(S)
    cdef double[::1] arow = np.empty(S)
    cdef double[::1] row_dot = np.empty(n), col_dot = np.zeros(S)
    cdef Py_ssize_t i, s, d, j, k_i
    cdef double c, a, maxl, sumexp, logz, acc, scale, loss = 0.0

    _row_norms(Zv, zn)
    _row_norms(Pv, pn)
    scale = 1.0 / (m * temperature)
    # One pass per row: normalize the raw dot products into cosines,
    # softmax them, fold in the gold counts, and overwrite G with
    # M[i, s] = A[i, s] / (zn[i] * pn[s]) so that afterwards
    # dZ = M @ P - diag(row_dot / zn^2) Z and dP = M.T @ Z - diag(col_dot / pn^2) P.
    for i in range(n):
        maxl = -1e300
        for s in range(S):
            c = G[i, s] / (zn[i] * pn[s] * temperature)
            G[i, s] = c
            if c > maxl:
                maxl = c
        sumexp = 0.0
        for s in range(S):
            sumexp += exp(G[i, s] - maxl)
        logz = log(sumexp) + maxl

        k_i = gold_indptr[i + 1] - gold_indptr[i]
        for s in range(S):
            arow[s] = k_i * exp(G[i, s] - logz)
        for j in range(gold_indptr[i], gold_indptr[i + 1]):
            loss += logz - G[i, gold_idx[j]]
            arow[gold_idx[j]] -= 1.0
        acc = 0.0
        for s in range(S):
            a = arow[s] * scale
            c = G[i, s] * temperature  # back to the cosine itself
            acc += a * c
            col_dot[s] += a * c
            G[i, s] = a / (zn[i] * pn[s])
        row_dot[i] = acc

    dZ_arr = np.dot(G_arr, P_arr)
    dP_arr = np.dot(G_arr.T, Z_arr)
    cdef double[:, ::1] dZ = dZ_arr, dP = dP_arr
    for i in range(n):
        a = row_dot[i] / (zn[i] * zn[i])
        for d in range(D):
            dZ[i, d] -= a * Zv[i, d]
    for s in range(S):
        a = col_dot[s] / (pn[s] * pn[s])
        for d in range(D):
            dP[s, d] -= a * Pv[s, d]
    return loss / m, dZ_arr, dP_arr


def best_split_sorted(const double[::1] xs, const double[::1] gs):
    """Best SSE-reduction split over an ascending-sorted feature column.

    Same contract as the pure version: (gain, threshold), lowest threshold
    wins ties, (-1.0, nan) when there is no valid boundary.
    """
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t k
    cdef double total = 0.0, left = 0.0, right, gain
    cdef double best_gain = -1.0, best_thr = NAN
    if n < 2:
        return -1.0, float("nan")
    for k in range(n):
        total += gs[k]
    for k in range(n - 1):
        left += gs[k]
        if xs[k] < xs[k + 1]:
            right = total - left
            gain = left * left / (k + 1) + right * right / (n - k - 1) - total * total / n
            if gain > best_gain:
                best_gain = gain
                best_thr = xs[k]
    return best_gain, best_thr
