"""Negative-cluster selection strategies and the identity-balanced sampler.

Strategies (config tags appear verbatim in config files):
  ctrdAll   every cluster whose label differs from the anchor's
  ctrdAvg   one synthetic cluster: mean of all negative centroids,
            radius = max of their radii
  ctrdHM    the cluster whose centroid is nearest the anchor's cluster
            centroid (global hard cluster)
  batchNeg  among labels present in the batch, the cluster whose centroid
            is nearest the anchor embedding itself

Argmin ties break toward the lowest identity label.
"""

from dataclasses import dataclass

import numpy as np

from .clusters import ClusterStats, stats_arrays
from .errors import InvalidBatchError, MissingClusterError, NoNegativeClusterError

NEGATIVE_STRATEGIES = ("ctrdAll", "ctrdAvg", "ctrdHM", "batchNeg")


@dataclass
class BatchSpec:
    identities_per_batch: int = 4
    samples_per_identity: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.identities_per_batch < 2:
            raise ValueError("need at least 2 identities per batch")
        if self.samples_per_identity < 1:
            raise ValueError("need at least 1 sample per identity")

    @property
    def batch_size(self):
        return self.identities_per_batch * self.samples_per_identity


def _nearest_label(point, labels, centroids):
    d2 = np.einsum("ij,ij->i", centroids - point, centroids - point)
    return int(labels[int(np.argmin(d2))])


def select_negatives(anchor_label, stats, strategy, batch_labels=None,
                     anchor_embedding=None):
    """Negative ClusterStats list for one anchor under the given strategy."""
    anchor_label = int(anchor_label)
    neg_labels = sorted(l for l in stats if l != anchor_label)
    if not neg_labels:
        raise NoNegativeClusterError(
            f"no negative cluster for anchor label {anchor_label}")

    if strategy == "ctrdAll":
        return [stats[l] for l in neg_labels]

    if strategy == "ctrdAvg":
        cents = np.stack([stats[l].centroid for l in neg_labels])
        return [ClusterStats(
            label=-1,
            centroid=cents.mean(axis=0),
            radius=max(stats[l].radius for l in neg_labels),
            member_count=sum(stats[l].member_count for l in neg_labels),
        )]

    if strategy == "ctrdHM":
        if anchor_label not in stats:
            raise MissingClusterError(
                f"anchor label {anchor_label} has no cluster stats")
        labs = np.array(neg_labels)
        cents = np.stack([stats[l].centroid for l in neg_labels])
        return [stats[_nearest_label(stats[anchor_label].centroid, labs, cents)]]

    if strategy == "batchNeg":
        if batch_labels is None or anchor_embedding is None:
            raise ValueError("batchNeg needs batch_labels and anchor_embedding")
        cand = sorted(set(int(l) for l in np.asarray(batch_labels))
                      & set(neg_labels))
        if not cand:
            raise NoNegativeClusterError(
                "batch holds no label different from the anchor's")
        labs = np.array(cand)
        cents = np.stack([stats[l].centroid for l in cand])
        point = np.asarray(anchor_embedding, dtype=np.float64)
        return [stats[_nearest_label(point, labs, cents)]]

    raise ValueError(f"unknown strategy {strategy!r}")


def hard_negative_map(stats):
    """label -> nearest *other* cluster's label, ties to the lowest label."""
    labs, cents, _ = stats_arrays(stats)
    if len(labs) < 2:
        raise NoNegativeClusterError("need at least 2 clusters")
    sq = np.einsum("ij,ij->i", cents, cents)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (cents @ cents.T)
    np.fill_diagonal(d2, np.inf)
    # exact distances for rows where the BLAS shortcut is ambiguous
    order = np.argsort(d2, axis=1, kind="stable")
    best, runner = order[:, 0], order[:, 1]
    close = d2[np.arange(len(labs)), runner] - d2[np.arange(len(labs)), best] \
        <= 1e-7 * np.maximum(1.0, np.abs(d2[np.arange(len(labs)), best]))
    for i in np.flatnonzero(close):
        diff = cents - cents[i]
        e2 = np.einsum("ij,ij->i", diff, diff)
        e2[i] = np.inf
        best[i] = int(np.argmin(e2))
    return {int(labs[i]): int(labs[best[i]]) for i in range(len(labs))}


def sample_batches(dataset, spec, epoch=0):
    """Identity-balanced batches: exactly P_b distinct identities with K_b
    samples each (with replacement only when an identity is short). One
    epoch covers every identity at least once; deterministic under
    (spec.seed, epoch).

    Returns a list of index arrays into the dataset.
    """
    labels = dataset.labels if hasattr(dataset, "labels") else \
        np.asarray(dataset, dtype=np.int64)
    ids = np.unique(labels)
    pb, kb = spec.identities_per_batch, spec.samples_per_identity
    if len(ids) < pb:
        raise InvalidBatchError(
            f"{len(ids)} identities available, {pb} per batch required")
    rng = np.random.default_rng([spec.seed, epoch, 0x5A])
    perm = rng.permutation(ids)
    members = {int(l): np.flatnonzero(labels == l) for l in ids}
    batches = []
    for i0 in range(0, len(perm), pb):
        chunk = perm[i0:i0 + pb].tolist()
        if len(chunk) < pb:
            pool = np.setdiff1d(ids, chunk)
            chunk.extend(rng.choice(pool, size=pb - len(chunk), replace=False))
        take = []
        for lab in chunk:
            rows = members[int(lab)]
            take.append(rng.choice(rows, size=kb, replace=len(rows) < kb))
        batches.append(np.concatenate(take).astype(np.int64))
    return batches
