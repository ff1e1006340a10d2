"""Retrieval evaluation (top-k, mAP), transfer evaluation, and the
closed-form triplet/pair counts."""

from dataclasses import dataclass, field

import numpy as np

from .core import pairwise_distances
from .errors import DimensionMismatchError
from .trainer import embed_dataset


@dataclass
class EvalReport:
    top1: float
    top5: float
    top10: float
    mean_ap: float
    query_count: int
    skipped_queries: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"top1": self.top1, "top5": self.top5, "top10": self.top10,
             "mAP": self.mean_ap, "query_count": self.query_count,
             "skipped_queries": self.skipped_queries}
        d.update(self.extra)
        return d


def count_triplets_vanilla(p, k):
    """Number of valid (a, p, n) triplets in a P-identity, K-per-identity
    set: P*K*(K-1)*(P*K - K)."""
    if p < 1 or k < 1:
        raise ValueError("counts must be positive")
    return p * k * (k - 1) * (p * k - k)


def count_pairs_hard_mining(p, k):
    """Pair evaluations with hard mining: P*K*(P*K - 1) + P*K."""
    if p < 1 or k < 1:
        raise ValueError("counts must be positive")
    n = p * k
    return n * (n - 1) + n


def evaluate_retrieval(query_emb, query_labels, gallery_emb, gallery_labels):
    """Rank the gallery per query by ascending distance (ties by gallery
    index); top-k counts a hit when any of the k nearest shares the label;
    AP averages precision at each match rank. Queries with no gallery match
    are skipped and counted."""
    query_emb = np.atleast_2d(np.asarray(query_emb, dtype=np.float64))
    gallery_emb = np.atleast_2d(np.asarray(gallery_emb, dtype=np.float64))
    query_labels = np.asarray(query_labels, dtype=np.int64)
    gallery_labels = np.asarray(gallery_labels, dtype=np.int64)
    if gallery_emb.shape[0] == 0:
        raise ValueError("gallery must be nonempty")
    if query_emb.shape[1] != gallery_emb.shape[1]:
        raise DimensionMismatchError("query/gallery dimension mismatch")

    dist = pairwise_distances(query_emb, gallery_emb)
    hits = {1: 0, 5: 0, 10: 0}
    aps = []
    skipped = 0
    for qi in range(len(query_labels)):
        order = np.argsort(dist[qi], kind="stable")
        match = gallery_labels[order] == query_labels[qi]
        positions = np.flatnonzero(match)
        if positions.size == 0:
            skipped += 1
            continue
        for k in hits:
            if match[:k].any():
                hits[k] += 1
        ranks = positions + 1.0
        aps.append(float(np.mean(np.arange(1, len(ranks) + 1) / ranks)))
    evaluated = len(aps)
    if evaluated == 0:
        return EvalReport(0.0, 0.0, 0.0, 0.0, 0, skipped)
    return EvalReport(
        top1=hits[1] / evaluated,
        top5=hits[5] / evaluated,
        top10=hits[10] / evaluated,
        mean_ap=float(np.mean(aps)),
        query_count=evaluated,
        skipped_queries=skipped,
    )


def evaluate_model(model, gallery_dataset, query_dataset):
    """Embed both splits with the model and run retrieval evaluation.
    Ground truth uses clean labels when the datasets carry them."""
    return evaluate_retrieval(
        embed_dataset(model, query_dataset), query_dataset.eval_labels,
        embed_dataset(model, gallery_dataset), gallery_dataset.eval_labels)


def evaluate_transfer(model, gallery_dataset, query_dataset):
    """Direct transfer: evaluate a model trained elsewhere on another
    dataset's query/gallery split, with no retraining."""
    if gallery_dataset.input_dim != model.input_dim:
        raise DimensionMismatchError(
            f"dataset dim {gallery_dataset.input_dim} != model input dim "
            f"{model.input_dim}")
    return evaluate_model(model, gallery_dataset, query_dataset)
