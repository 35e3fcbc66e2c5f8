"""Downstream evaluation: ranking, regression, clustering, classification.

Every metric is deterministic: ranking ties break by ascending feature index,
k-means is fully seeded, cross-validation folds are a seeded round-robin.
Recall@K normalizes by min(K, number of positives) so that a perfect ranking
scores 1.0 at every K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, f1_score, normalized_mutual_info_score

from .errors import InputError
from .optim import adam_step, init_adam

DEFAULT_K_LIST = (10, 20, 50)


@dataclass(frozen=True)
class RankingMetrics:
    recall_at: dict
    ndcg_at: dict
    n_evaluated: int


@dataclass(frozen=True)
class ClusterMetrics:
    acc: float
    nmi: float
    ari: float
    f1: float


def _top_k_indices(scores, k):
    """Indices of the k largest scores, ties broken by ascending index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return order[:k]


def recall_at_k(scores_row, truth_row, k) -> float:
    """|top-k predicted dims intersect positives| / min(k, #positives)."""
    truth_row = np.asarray(truth_row)
    positives = np.flatnonzero(truth_row > 0)
    if positives.size == 0:
        raise InputError("recall needs at least one positive dimension")
    k = min(int(k), truth_row.shape[0])
    top = _top_k_indices(scores_row, k)
    hits = np.isin(top, positives).sum()
    return float(hits / min(k, positives.size))


def ndcg_at_k(scores_row, truth_row, k) -> float:
    """Binary-gain DCG@k / IDCG@k with the log2(rank+1) discount."""
    truth_row = np.asarray(truth_row)
    positives = np.flatnonzero(truth_row > 0)
    if positives.size == 0:
        raise InputError("ndcg needs at least one positive dimension")
    k = min(int(k), truth_row.shape[0])
    top = _top_k_indices(scores_row, k)
    gains = np.isin(top, positives).astype(np.float64)
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = float((gains * discounts).sum())
    ideal = min(k, positives.size)
    idcg = float(discounts[:ideal].sum())
    return dcg / idcg


def ranking_metrics(x_hat, x_true, k_list=DEFAULT_K_LIST) -> RankingMetrics:
    """Mean recall/nDCG over rows that have at least one positive."""
    x_hat = np.asarray(x_hat)
    x_true = np.asarray(x_true)
    if x_hat.shape != x_true.shape:
        raise InputError(f"shape mismatch {x_hat.shape} vs {x_true.shape}")
    npos = (x_true > 0).sum(axis=1)
    eligible = np.flatnonzero(npos > 0)
    recall = {}
    ndcg = {}
    if eligible.size == 0:
        for k in k_list:
            recall[int(k)] = float("nan")
            ndcg[int(k)] = float("nan")
        return RankingMetrics(recall_at=recall, ndcg_at=ndcg, n_evaluated=0)
    scores = x_hat[eligible].astype(np.float64)
    truth = x_true[eligible] > 0
    t, f = scores.shape
    order = np.argsort(-scores, axis=1, kind="stable")
    pos_count = truth.sum(axis=1)
    for k in k_list:
        kk = min(int(k), f)
        top = order[:, :kk]
        hit = np.take_along_axis(truth, top, axis=1)
        denom = np.minimum(kk, pos_count)
        recall[int(k)] = float((hit.sum(axis=1) / denom).mean())
        discounts = 1.0 / np.log2(np.arange(2, kk + 2))
        dcg = (hit * discounts).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(discounts)])
        idcg = cum[np.minimum(kk, pos_count)]
        ndcg[int(k)] = float((dcg / idcg).mean())
    return RankingMetrics(recall_at=recall, ndcg_at=ndcg,
                          n_evaluated=int(eligible.size))


def mean_recall_at_k(x_hat, x_true, k) -> float:
    return ranking_metrics(x_hat, x_true, k_list=(k,)).recall_at[int(k)]


def rmse_and_corr(x_hat_test, x_true_test):
    """Entry-wise RMSE and mean per-row Pearson correlation.

    Rows where either side has zero variance contribute correlation 0.
    """
    a = np.asarray(x_hat_test, dtype=np.float64)
    b = np.asarray(x_true_test, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        raise InputError("rmse_and_corr needs at least one row")
    rmse = float(np.sqrt(((a - b) ** 2).mean()))
    ac = a - a.mean(axis=1, keepdims=True)
    bc = b - b.mean(axis=1, keepdims=True)
    num = (ac * bc).sum(axis=1)
    den = np.sqrt((ac * ac).sum(axis=1) * (bc * bc).sum(axis=1))
    corr = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return rmse, float(corr.mean())


def _kmeans_pp_init(z, k, rng):
    n = z.shape[0]
    centers = np.empty((k, z.shape[1]), dtype=z.dtype)
    first = int(rng.integers(n))
    centers[0] = z[first]
    d2 = ((z - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = z[idx]
        d2 = np.minimum(d2, ((z - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(z, k, seed, max_iter=300):
    """Seeded k-means++ then Lloyd iterations to an assignment fixed point.

    An emptied cluster is re-seeded to the point farthest from its own
    center before the next assignment pass.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if k > n:
        raise InputError(f"k={k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(z, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    zz = (z * z).sum(axis=1)[:, None]
    for _ in range(max_iter):
        cc = (centers * centers).sum(axis=1)[None, :]
        d2 = np.maximum(zz - 2.0 * (z @ centers.T) + cc, 0.0)
        new_assign = d2.argmin(axis=1)
        empties = np.setdiff1d(np.arange(k), np.unique(new_assign))
        if empties.size:
            own = d2[np.arange(n), new_assign]
            order = np.argsort(-own, kind="stable")
            for slot, c in enumerate(empties):
                centers[c] = z[order[slot]]
            continue
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            centers[c] = z[assign == c].mean(axis=0)
    return assign


def clustering_metrics(assign, labels) -> ClusterMetrics:
    """ACC by optimal cluster-to-label matching, plus NMI, ARI, macro F1."""
    assign = np.asarray(assign)
    labels = np.asarray(labels)
    if assign.shape != labels.shape:
        raise InputError("assignment and labels must have the same length")
    clusters, assign_c = np.unique(assign, return_inverse=True)
    classes, labels_c = np.unique(labels, return_inverse=True)
    side = max(clusters.size, classes.size)
    w = np.zeros((side, side), dtype=np.int64)
    np.add.at(w, (assign_c, labels_c), 1)
    row, col = linear_sum_assignment(w.max() - w)
    acc = float(w[row, col].sum() / labels.shape[0])
    mapping = dict(zip(row.tolist(), col.tolist()))
    mapped = np.array([mapping[c] for c in assign_c])
    f1 = float(f1_score(labels_c, mapped, average="macro",
                        labels=np.arange(classes.size), zero_division=0))
    nmi = float(normalized_mutual_info_score(labels_c, assign_c))
    ari = float(adjusted_rand_score(labels_c, assign_c))
    return ClusterMetrics(acc=acc, nmi=nmi, ari=ari, f1=f1)


def _softmax_cross_entropy(logits, onehot):
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    loss = float(-(onehot * logp).sum() / logits.shape[0])
    dlogits = (np.exp(logp) - onehot) / logits.shape[0]
    return loss, dlogits


def _fit_mlp_classifier(x_train, y_train, n_classes, seed, width=256,
                        lr=1e-2, epochs=300):
    rng = np.random.default_rng(seed)
    f = x_train.shape[1]
    lim1 = np.sqrt(6.0 / (f + width))
    lim2 = np.sqrt(6.0 / (width + n_classes))
    tensors = {
        "w1": rng.uniform(-lim1, lim1, (f, width)).astype(np.float32),
        "b1": np.zeros(width, dtype=np.float32),
        "w2": rng.uniform(-lim2, lim2, (width, n_classes)).astype(np.float32),
        "b2": np.zeros(n_classes, dtype=np.float32),
    }
    onehot = np.zeros((x_train.shape[0], n_classes), dtype=np.float32)
    onehot[np.arange(x_train.shape[0]), y_train] = 1.0
    state = init_adam(tensors)
    x32 = x_train.astype(np.float32)
    for _ in range(epochs):
        h_pre = x32 @ tensors["w1"] + tensors["b1"]
        h = np.maximum(h_pre, 0.0)
        logits = h @ tensors["w2"] + tensors["b2"]
        _, dlogits = _softmax_cross_entropy(logits, onehot)
        grads = {
            "w2": h.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        dh = (dlogits @ tensors["w2"].T) * (h_pre > 0)
        grads["w1"] = x32.T @ dh
        grads["b1"] = dh.sum(axis=0)
        adam_step(tensors, grads, state, lr)
    return tensors


def _mlp_predict(tensors, x):
    h = np.maximum(x.astype(np.float32) @ tensors["w1"] + tensors["b1"], 0.0)
    return (h @ tensors["w2"] + tensors["b2"]).argmax(axis=1)


def classify_cv(x_hat, labels, seed, n_folds=5) -> float:
    """Stratified 5-fold CV accuracy of a one-hidden-layer MLP classifier."""
    x_hat = np.asarray(x_hat)
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise InputError("classification needs at least two classes")
    counts = np.bincount(y)
    if counts.min() < n_folds:
        small = classes[counts < n_folds]
        raise InputError(
            f"classes {small.tolist()} have fewer than {n_folds} members; "
            "stratified folds cannot be built"
        )
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for c in range(classes.size):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = np.arange(idx.size) % n_folds
    accs = []
    for fold in range(n_folds):
        test = fold_of == fold
        tensors = _fit_mlp_classifier(x_hat[~test], y[~test], classes.size,
                                      seed=[seed, fold])
        pred = _mlp_predict(tensors, x_hat[test])
        accs.append(float((pred == y[test]).mean()))
    return float(np.mean(accs))


def knn_homogeneity(x_hat, labels, k_list=(1, 10, 20, 50, 100, 200)) -> dict:
    """Same-label fraction of directed KNN edges under cosine similarity.

    Each node links to its k most similar others (self excluded, ties by
    ascending index).
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    labels = np.asarray(labels)
    n = x_hat.shape[0]
    if max(k_list) >= n:
        raise InputError(f"k={max(k_list)} must be below the node count {n}")
    norms = np.linalg.norm(x_hat, axis=1)
    xn = x_hat / np.where(norms > 0, norms, 1.0)[:, None]
    sims = xn @ xn.T
    np.fill_diagonal(sims, -np.inf)
    k_max = max(k_list)
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k_max]
    same = labels[order] == labels[:, None]
    return {int(k): float(same[:, :k].mean()) for k in k_list}
