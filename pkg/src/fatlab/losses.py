"""Loss functions: triplet (batch-all / batch-hard), point-to-set losses
with and without the cluster-compactness term, cross entropy, and the
hybrid combination. Every loss returns its value and the analytic gradient.

Centroids and radii are constants within a step (no gradient); they are
refreshed once per epoch by the trainer, so compactness pressure enters
through the refresh, not through per-step gradients.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import get_backend
from .clusters import CENTROID_OPTIONS, NORMALIZED_OPTIONS
from .core import EPS_NORM, pairwise_distances, softmax
from .errors import (ConfigError, DegenerateVectorError, EmptyTripletSetError,
                     InvalidBatchError, NoNegativeClusterError)
from .mining import NEGATIVE_STRATEGIES

LOSS_SELECTORS = ("CE", "tripletBatchAll", "tripletBatchHard",
                  "CE-FAT", "CE-FATnorm", "CE-P2S", "CE-P2Snorm")


@dataclass
class LossConfig:
    """Hyper-parameters shared by the training losses.

    margin defaults to 1.0 raw / 0.1 normalized; the centroid option must
    be C1 for raw-space losses and one of C2/C3/C4 for normalized ones.
    """

    margin: float = None
    hybrid_weight: float = 1.0
    normalized: bool = False
    centroid_option: str = None
    negative_strategy: str = "batchNeg"
    average_active_only: bool = False

    def __post_init__(self):
        if self.margin is None:
            self.margin = 0.1 if self.normalized else 1.0
        if self.centroid_option is None:
            self.centroid_option = "C4" if self.normalized else "C1"
        if self.margin <= 0:
            raise ConfigError("margin must be > 0")
        if self.hybrid_weight < 0:
            raise ConfigError("hybrid weight must be >= 0")
        if self.centroid_option not in CENTROID_OPTIONS:
            raise ConfigError(f"unknown centroid option {self.centroid_option!r}")
        if self.negative_strategy not in NEGATIVE_STRATEGIES:
            raise ConfigError(f"unknown negative strategy {self.negative_strategy!r}")
        if self.normalized and self.centroid_option not in NORMALIZED_OPTIONS:
            raise ConfigError(
                "normalized losses require centroid option C2, C3 or C4")
        if not self.normalized and self.centroid_option != "C1":
            raise ConfigError("raw-space losses require centroid option C1")


@dataclass
class LossOutput:
    value: float
    gradients: np.ndarray
    active_count: int
    term_count: int = 0
    extras: dict = field(default_factory=dict)


def _count_by_label(labels):
    labs, counts = np.unique(labels, return_counts=True)
    return dict(zip(labs.tolist(), counts.tolist()))


def _grad_from_pair_counts(dist, x, c_pos, c_neg, scale):
    """Assemble batch-all gradients from active-pair counts.

    Each active triple (a,p,n) contributes +u_ap - u_an to anchor a,
    -u_ap to p and +u_an to n, with u_ij = (x_i - x_j)/d_ij. Summing over
    triples gives grad_i = sum_j K_ij u_ij with
    K = (C_pos + C_pos^T) - (C_neg + C_neg^T).
    """
    k = (c_pos + c_pos.T) - (c_neg + c_neg.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        kt = np.where(dist > 0.0, k / dist, 0.0)
    np.fill_diagonal(kt, 0.0)
    return scale * (kt.sum(axis=1)[:, None] * x - kt @ x)


def triplet_batch_all(embeddings, labels, margin, average_active_only=False,
                      backend="auto"):
    """Mean hinge over all valid triplets in the batch."""
    x = np.ascontiguousarray(embeddings, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    counts = _count_by_label(labels)
    n = len(labels)
    if not any(c >= 2 and c < n for c in counts.values()):
        raise EmptyTripletSetError("batch contains no valid triplet")
    dist = pairwise_distances(x)
    kern = get_backend(backend)
    hinge_sum, active, total, c_pos, c_neg = kern.triplet_all_terms(
        dist, labels, float(margin), True)
    denom = active if average_active_only else total
    if denom == 0:
        return LossOutput(0.0, np.zeros_like(x), 0, total)
    grad = _grad_from_pair_counts(dist, x, c_pos, c_neg, 1.0 / denom)
    return LossOutput(hinge_sum / denom, grad, active, total)


def triplet_batch_hard(embeddings, labels, margin, backend="auto"):
    """Per anchor: hardest positive and hardest negative; mean over anchors."""
    x = np.ascontiguousarray(embeddings, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    counts = _count_by_label(labels)
    n = len(labels)
    for lab, c in counts.items():
        if c < 2:
            raise InvalidBatchError(f"anchor of class {lab} has no positive")
        if c == n:
            raise InvalidBatchError(f"anchor of class {lab} has no negative")
    dist = pairwise_distances(x)
    kern = get_backend(backend)
    h, hp, hn = kern.triplet_hard_terms(dist, labels, float(margin))
    grad = np.zeros_like(x)
    rows = np.arange(n)
    act = h > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        u_p = np.where(dist[rows, hp][:, None] > 0.0,
                       (x - x[hp]) / dist[rows, hp][:, None], 0.0)
        u_n = np.where(dist[rows, hn][:, None] > 0.0,
                       (x - x[hn]) / dist[rows, hn][:, None], 0.0)
    w = act / float(n)
    np.add.at(grad, rows, w[:, None] * (u_p - u_n))
    np.add.at(grad, hp, -w[:, None] * u_p)
    np.add.at(grad, hn, w[:, None] * u_n)
    return LossOutput(float(h.mean()), grad, int(act.sum()), n)


def point_to_set_batch(anchors, own_cent, own_rad, neg_cent, neg_rad,
                       neg_start, margin, normalized=False,
                       include_radii=True, backend="auto"):
    """Batch point-to-set loss: each anchor against its negative slice.

    Cluster inputs live in normalized space when ``normalized`` is set, in
    which case anchors are normalized internally and the gradient carries
    the normalization Jacobian. Returns per-anchor losses averaged into one
    value and (n, d) gradients w.r.t. the raw anchors.
    """
    a = np.ascontiguousarray(anchors, dtype=np.float64)
    raw = a
    if normalized:
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms <= EPS_NORM):
            raise DegenerateVectorError("anchor with near-zero norm")
        a = np.ascontiguousarray(a / norms[:, None])
    kern = get_backend(backend)
    per, grad, active, total = kern.fat_terms(
        a, np.ascontiguousarray(own_cent, dtype=np.float64),
        np.ascontiguousarray(own_rad, dtype=np.float64),
        np.ascontiguousarray(neg_cent, dtype=np.float64),
        np.ascontiguousarray(neg_rad, dtype=np.float64),
        np.ascontiguousarray(neg_start, dtype=np.int64),
        float(margin), bool(include_radii), True)
    if normalized:
        # d(a/||a||)/da pullback: (g - ahat (ahat.g)) / ||a||
        dots = np.einsum("ij,ij->i", a, grad)
        grad = (grad - a * dots[:, None]) / norms[:, None]
    # value is the mean over anchors; scale gradients to match
    grad = grad / len(a)
    value = float(per.mean())
    extras = {"per_anchor": per}
    if include_radii:
        start = neg_start[:-1]
        counts = np.diff(neg_start)
        mean_neg_rad = np.add.reduceat(np.asarray(neg_rad, dtype=np.float64),
                                       start) / counts
        extras["compactness"] = float(np.mean(own_rad + mean_neg_rad))
    _ = raw
    return LossOutput(value, grad, active, total, extras)


def _single_anchor_call(anchor, anchor_stats, negative_stats, margin,
                        normalized, include_radii, backend):
    if not negative_stats:
        raise NoNegativeClusterError("no negative cluster supplied")
    a = np.asarray(anchor, dtype=np.float64)[None, :]
    own_cent = anchor_stats.centroid[None, :]
    own_rad = np.array([anchor_stats.radius])
    neg_cent = np.stack([s.centroid for s in negative_stats])
    neg_rad = np.array([s.radius for s in negative_stats])
    neg_start = np.array([0, len(negative_stats)], dtype=np.int64)
    out = point_to_set_batch(a, own_cent, own_rad, neg_cent, neg_rad,
                             neg_start, margin, normalized, include_radii,
                             backend)
    out.gradients = out.gradients[0]
    return out


def fat_loss(anchor, anchor_stats, negative_stats, margin, backend="auto"):
    """Point-to-set hinge plus cluster compactness (own + negative radii).

    Mean over the supplied negative clusters of
    max(0, d(a, c_own) + m - d(a, c_neg)) + R(own) + R(neg). Gradients flow
    to the anchor embedding only; centroids and radii are constants.
    """
    return _single_anchor_call(anchor, anchor_stats, negative_stats, margin,
                               normalized=False, include_radii=True,
                               backend=backend)


def p2s_loss(anchor, anchor_stats, negative_stats, margin, backend="auto"):
    """fat_loss without the compactness (radius) terms."""
    return _single_anchor_call(anchor, anchor_stats, negative_stats, margin,
                               normalized=False, include_radii=False,
                               backend=backend)


def fat_loss_normalized(anchor, anchor_stats, negative_stats, margin,
                        backend="auto"):
    """fat_loss on the unit sphere: anchor is normalized, cluster stats must
    already live in normalized space, and the gradient includes the
    normalization Jacobian."""
    return _single_anchor_call(anchor, anchor_stats, negative_stats, margin,
                               normalized=True, include_radii=True,
                               backend=backend)


def p2s_loss_normalized(anchor, anchor_stats, negative_stats, margin,
                        backend="auto"):
    return _single_anchor_call(anchor, anchor_stats, negative_stats, margin,
                               normalized=True, include_radii=False,
                               backend=backend)


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, target):
    """-sum(t ln softmax(logits)); gradient (w.r.t. logits) = softmax - t.

    ``target`` is a class index, an index array, or a probability row per
    logit row. Batched inputs are averaged and the gradient scaled to
    match.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    zb = np.atleast_2d(z)
    n, c = zb.shape
    if np.isscalar(target) or (isinstance(target, np.ndarray) and target.ndim == 0):
        target = np.full(n, int(target))
    target = np.asarray(target)
    if target.ndim <= 1 and np.issubdtype(target.dtype, np.integer):
        idx = np.atleast_1d(target).astype(np.int64)
        if idx.shape != (n,) or idx.min() < 0 or idx.max() >= c:
            raise ValueError("invalid target class index")
        t = np.zeros((n, c))
        t[np.arange(n), idx] = 1.0
    else:
        t = np.atleast_2d(np.asarray(target, dtype=np.float64))
        if t.shape != (n, c):
            raise ValueError(f"target shape {t.shape} != logits shape {(n, c)}")
        if np.any(t < -1e-12) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("target rows must be probability vectors")
    logp = _log_softmax(zb)
    value = float(-(t * logp).sum(axis=1).mean())
    grad = (softmax(zb) - t) / n
    return LossOutput(value, grad[0] if single else grad, 0, n)


def hybrid_loss(first, second, weight):
    """first + weight * second, values and gradients alike."""
    if np.shape(first.gradients) != np.shape(second.gradients):
        raise ValueError("hybrid components have mismatched gradient shapes")
    return LossOutput(
        first.value + weight * second.value,
        first.gradients + weight * second.gradients,
        first.active_count + second.active_count,
        first.term_count + second.term_count,
        dict(first.extras))
