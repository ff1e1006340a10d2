"""In-memory dataset container and split helpers."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """Feature vectors with identity labels.

    ``clean_labels`` keeps the pre-noise ground truth when the dataset went
    through ``inject_noise``; it equals ``labels`` for clean data.
    """

    features: np.ndarray          # (n, d) float64
    labels: np.ndarray            # (n,) int64
    num_classes: int
    ids: np.ndarray = field(default=None)
    clean_labels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.labels) != len(self.features):
            raise ValueError("features must be (n, d) with one label per row")
        if self.ids is None:
            self.ids = np.arange(len(self.labels), dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.clean_labels is not None:
            self.clean_labels = np.asarray(self.clean_labels, dtype=np.int64)

    def __len__(self):
        return len(self.labels)

    @property
    def input_dim(self):
        return self.features.shape[1]

    @property
    def eval_labels(self):
        """Ground-truth labels for evaluation (clean when available)."""
        return self.clean_labels if self.clean_labels is not None else self.labels

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            ids=self.ids[indices],
            clean_labels=None if self.clean_labels is None
            else self.clean_labels[indices],
        )


def split_query_gallery(dataset, queries_per_identity=2, seed=0):
    """Hold out ``queries_per_identity`` samples per identity as queries.

    Identities are grouped by the evaluation labels (clean ground truth when
    present). Returns (gallery_dataset, query_dataset); deterministic under
    seed.
    """
    labels = dataset.eval_labels
    rng = np.random.default_rng([seed, 0x51])
    query_idx = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        k = min(queries_per_identity, max(len(members) - 1, 0))
        if k > 0:
            query_idx.extend(rng.choice(members, size=k, replace=False))
    query_idx = np.sort(np.asarray(query_idx, dtype=np.int64))
    mask = np.ones(len(dataset), dtype=bool)
    mask[query_idx] = False
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(query_idx)
