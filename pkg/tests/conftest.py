import numpy as np
import pytest

from fatlab.backend import available_backends


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def central_difference(f, x, step=1e-5):
    """Central finite-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy(); xp.flat[i] += step
        xm = x.copy(); xm.flat[i] -= step
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return np.linalg.norm(a - b) / denom


def clustered_data(rng, n_clusters, per_cluster, dim, spread=5.0, noise=1.0):
    """Random labeled point clouds, one Gaussian blob per identity."""
    centers = spread * rng.normal(size=(n_clusters, dim))
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    x = centers[labels] + noise * rng.normal(size=(len(labels), dim))
    return x, labels.astype(np.int64)


def enumerate_valid_triplets(p, k):
    """Brute-force count of (a, p, n) with y_p == y_a, p != a, y_n != y_a."""
    labels = [i // k for i in range(p * k)]
    n = len(labels)
    count = 0
    for a in range(n):
        for q in range(n):
            if q == a or labels[q] != labels[a]:
                continue
            for r in range(n):
                if labels[r] != labels[a]:
                    count += 1
    return count


def oracle_retrieval(query_emb, query_labels, gallery_emb, gallery_labels):
    """Independent O(N^2) retrieval oracle: per-pair loops, tuple sort for
    the distance/index tie-break, precision accumulated per match rank."""
    import math

    from fatlab.evaluation import EvalReport
    hits = {1: 0, 5: 0, 10: 0}
    aps = []
    skipped = 0
    for qi in range(len(query_labels)):
        ranked = sorted(
            (math.sqrt(float(((query_emb[qi] - gallery_emb[gj]) ** 2).sum())),
             gj)
            for gj in range(len(gallery_labels)))
        match = [gallery_labels[gj] == query_labels[qi] for _, gj in ranked]
        if not any(match):
            skipped += 1
            continue
        for k in hits:
            if any(match[:k]):
                hits[k] += 1
        precisions = []
        seen = 0
        for rank, hit in enumerate(match, start=1):
            if hit:
                seen += 1
                precisions.append(seen / rank)
        aps.append(float(np.mean(precisions)))
    n_eval = len(aps)
    if n_eval == 0:
        return EvalReport(0.0, 0.0, 0.0, 0.0, 0, skipped)
    return EvalReport(hits[1] / n_eval, hits[5] / n_eval, hits[10] / n_eval,
                      float(np.mean(aps)), n_eval, skipped)
