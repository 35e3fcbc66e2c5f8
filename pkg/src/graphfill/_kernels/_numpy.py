"""Pure-numpy reference kernels.

Semantics must match graphfill._kernels._ext exactly (up to float rounding in
a different but fixed summation order); tests/test_kernels.py enforces this.
"""

import numpy as np


def csr_spmm(indptr, indices, data, x):
    """Multiply a CSR matrix by a dense matrix: out[i] = sum_j A[i,j] * x[j].

    data must share x's dtype. Rows without stored entries come out zero.
    """
    n = indptr.shape[0] - 1
    out = np.zeros((n, x.shape[1]), dtype=x.dtype)
    if indices.shape[0] == 0:
        return out
    prod = data[:, None] * x[indices]
    nonempty = indptr[:-1] != indptr[1:]
    # reduceat segment k runs from one nonempty row start to the next, and
    # empty rows contribute no entries in between, so segments line up.
    starts = indptr[:-1][nonempty]
    out[nonempty] = np.add.reduceat(prod, starts, axis=0)
    return out


def nonedge_scan(sim, indptr, indices, tau, intent, grad_out=None):
    """Gated softplus over non-adjacent pairs (i < j) of a similarity matrix.

    Pairs with sim < tau contribute nothing. For the rest, with s = sim[i, j]:
      intent=True : loss += log(1 + e^s),  d loss / d s = sigmoid(s)
      intent=False: loss += log(1 + e^-s), d loss / d s = sigmoid(s) - 1
    The score accumulates sigmoid(s) over the same gated pairs. If grad_out is
    given it receives d loss / d sim at [i, j] and [j, i] (diagonal untouched).
    Returns (loss, score, gated_pair_count).
    """
    n = sim.shape[0]
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = True
    cand = np.triu(np.ones((n, n), dtype=bool), k=1) & ~adj & (sim >= tau)
    s = sim[cand].astype(np.float64)
    sig = 1.0 / (1.0 + np.exp(-s))
    if intent:
        loss = np.log1p(np.exp(s)).sum()
        g = sig
    else:
        loss = np.log1p(np.exp(-s)).sum()
        g = sig - 1.0
    score = sig.sum()
    if grad_out is not None:
        grad_out[cand] = g.astype(grad_out.dtype)
        ii, jj = np.nonzero(cand)
        grad_out[jj, ii] = grad_out[ii, jj]
    return float(loss), float(score), int(s.shape[0])
