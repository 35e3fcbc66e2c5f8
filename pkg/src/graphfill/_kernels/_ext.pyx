# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: CSR sparse-dense multiply and the gated non-edge scan.

Drop-in replacements for graphfill._kernels._numpy; the pure versions remain
the readable reference.
"""

import cython
import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport exp, log1p

ctypedef fused real:
    float
    double


def csr_spmm(indptr, indices, data, x):
    """CSR times dense, row-major output. data must share x's dtype."""
    if x.dtype == np.float32:
        return _csr_spmm_impl[cython.float](indptr, indices, data, x)
    return _csr_spmm_impl[cython.double](indptr, indices, data, x)


def _csr_spmm_impl(cnp.int64_t[::1] indptr, cnp.int32_t[::1] indices,
                   real[::1] data, real[:, ::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t f = x.shape[1]
    out_arr = np.zeros((n, f), dtype=np.asarray(x).dtype)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, q
    cdef real v
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            c = indices[p]
            v = data[p]
            for q in range(f):
                out[i, q] += v * x[c, q]
    return out_arr


def nonedge_scan(sim, indptr, indices, tau, intent, grad_out=None):
    """Gated softplus over non-adjacent (i < j) pairs; see the numpy kernel."""
    if sim.dtype == np.float32:
        return _nonedge_scan_impl[cython.float](sim, indptr, indices, tau,
                                                intent, grad_out)
    return _nonedge_scan_impl[cython.double](sim, indptr, indices, tau,
                                             intent, grad_out)


def _nonedge_scan_impl(real[:, ::1] sim, cnp.int64_t[::1] indptr,
                       cnp.int32_t[::1] indices, double tau, bint intent,
                       grad):
    cdef Py_ssize_t n = sim.shape[0]
    cdef real[:, ::1] g_view
    cdef bint want_grad = grad is not None
    if want_grad:
        g_view = grad
    cdef double loss = 0.0, score = 0.0
    cdef long count = 0
    cdef Py_ssize_t i, j, p, end
    cdef double s, sig
    for i in range(n):
        # advance p past stored neighbors with column <= i
        p = indptr[i]
        end = indptr[i + 1]
        while p < end and indices[p] <= i:
            p += 1
        for j in range(i + 1, n):
            if p < end and indices[p] == j:
                p += 1
                continue
            s = sim[i, j]
            if s < tau:
                continue
            sig = 1.0 / (1.0 + exp(-s))
            score += sig
            count += 1
            if intent:
                loss += log1p(exp(s))
                if want_grad:
                    g_view[i, j] = <real> sig
                    g_view[j, i] = <real> sig
            else:
                loss += log1p(exp(-s))
                if want_grad:
                    g_view[i, j] = <real> (sig - 1.0)
                    g_view[j, i] = <real> (sig - 1.0)
    return float(loss), float(score), int(count)
