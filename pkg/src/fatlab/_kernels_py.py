"""Pure-numpy loss kernels (fallback backend).

Batch-all visits the full n^3 dense triple space in anchor chunks with a
validity mask, matching how vectorized batch-all implementations actually
compute the loss; the compiled backend enumerates the same triple space with
explicit loops. Both report the hinge sum, the active/valid counts, and (on
request) per-pair active-triplet counts from which the caller assembles
gradients.
"""

import numpy as np

BACKEND_NAME = "python"


def triplet_all_terms(dist, labels, margin, with_counts):
    """Hinge statistics over every valid (a, p, n) triple.

    Returns (hinge_sum, active, total, c_pos, c_neg) where c_pos[a, p] is the
    number of active triples anchored at a with positive p, and c_neg[a, n]
    the number with negative n. c_pos/c_neg are None when with_counts is
    false.
    """
    n = dist.shape[0]
    same = labels[:, None] == labels[None, :]
    hinge_sum = 0.0
    active = 0
    total = 0
    c_pos = np.zeros((n, n)) if with_counts else None
    c_neg = np.zeros((n, n)) if with_counts else None
    chunk = max(1, 8_000_000 // (n * n))
    for a0 in range(0, n, chunk):
        a1 = min(a0 + chunk, n)
        rows = np.arange(a0, a1)
        h = dist[a0:a1, :, None] + margin - dist[a0:a1, None, :]
        valid = same[a0:a1, :, None] & ~same[a0:a1, None, :]
        valid[rows - a0, rows, :] = False
        pos = valid & (h > 0.0)
        hinge_sum += float(np.where(pos, h, 0.0).sum())
        active += int(pos.sum())
        total += int(valid.sum())
        if with_counts:
            c_pos[a0:a1] = pos.sum(axis=2)
            c_neg[a0:a1] = pos.sum(axis=1)
    return hinge_sum, active, total, c_pos, c_neg


def triplet_hard_terms(dist, labels, margin):
    """Per-anchor hardest-positive/hardest-negative hinge.

    Returns (hinge values (n,), hardest positive idx, hardest negative idx).
    Callers must ensure every anchor has a positive and a negative.
    """
    n = dist.shape[0]
    same = labels[:, None] == labels[None, :]
    eye = np.eye(n, dtype=bool)
    dp = np.where(same & ~eye, dist, -np.inf)
    dn = np.where(~same, dist, np.inf)
    hp = dp.argmax(axis=1)
    hn = dn.argmin(axis=1)
    rows = np.arange(n)
    h = np.maximum(0.0, dist[rows, hp] + margin - dist[rows, hn])
    return h, hp, hn


def fat_terms(anchors, own_cent, own_rad, neg_cent, neg_rad, neg_start,
              margin, include_radii, with_grad):
    """Point-to-set hinge terms, one anchor against its negative centroids.

    ``neg_start`` delimits each anchor's slice of ``neg_cent``/``neg_rad``
    (ragged layout, length n+1). Per anchor: mean over its negatives of
    max(0, d(a, c_own) + m - d(a, c_neg)), plus, when ``include_radii``,
    own radius + mean negative radius. Gradients flow to the anchor only.

    Returns (per-anchor loss (n,), grad (n, d) or None, active, total).
    """
    n, d = anchors.shape
    counts = np.diff(neg_start)
    aidx = np.repeat(np.arange(n), counts)

    own_diff = anchors - own_cent
    d_own = np.sqrt(np.einsum("ij,ij->i", own_diff, own_diff))
    neg_diff = anchors[aidx] - neg_cent
    d_neg = np.sqrt(np.einsum("ij,ij->i", neg_diff, neg_diff))

    arg = d_own[aidx] + margin - d_neg
    hinge = np.maximum(0.0, arg)
    act = arg > 0.0

    starts = neg_start[:-1]
    per_anchor = np.add.reduceat(hinge, starts) if len(hinge) else hinge
    per_anchor = per_anchor / counts
    if include_radii:
        mean_neg_rad = np.add.reduceat(neg_rad, starts) / counts
        per_anchor = per_anchor + own_rad + mean_neg_rad

    grad = None
    if with_grad:
        grad = np.zeros((n, d))
        with np.errstate(invalid="ignore", divide="ignore"):
            u_own = np.where(d_own[:, None] > 0.0, own_diff / d_own[:, None], 0.0)
            u_neg = np.where(d_neg[:, None] > 0.0, neg_diff / d_neg[:, None], 0.0)
        w = act.astype(np.float64) / counts[aidx]
        # d/da [d(a,c_own) - d(a,c_neg)] summed over active negatives
        np.add.at(grad, aidx, -w[:, None] * u_neg)
        grad += np.add.reduceat(w, starts)[:, None] * u_own
    return per_anchor, grad, int(act.sum()), int(len(hinge))
