"""Noisy-label pipeline: synthetic data, noise injection, confident-sample
selection, teacher self-bootstrapping, soft labels, and student training.

The teacher starts on the full (noisy) set with cross entropy; every cycle
it re-scores all samples, keeps the confident ones, and trains only on
those. The trained teacher's softmax outputs become soft labels with
confidence 1 - H/ln(C); the student trains a point-to-set loss where only
trusted samples (weighted by confidence) shape the centroids.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import entropy, softmax
from .data import Dataset
from .errors import ConfigError, EmptyTrustedSetError
from .model import forward
from .trainer import train

NOISE_CODES = {"clean": 0, "flip": 1, "outlier": 2, "mixture": 3}
NOISE_NAMES = {v: k for k, v in NOISE_CODES.items()}
SELECTION_MODES = ("hardThreshold", "softThreshold", "hardPercentage",
                   "softPercentage")


@dataclass
class NoiseSpec:
    flip_rate: float = 0.0
    outlier_rate: float = 0.0
    mixture_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        rates = (self.flip_rate, self.outlier_rate, self.mixture_rate)
        if any(r < 0 or r > 1 for r in rates):
            raise ConfigError("noise rates must lie in [0, 1]")
        if sum(rates) > 1.0 + 1e-12:
            raise ConfigError("noise rates must sum to at most 1")


@dataclass
class SelectionMode:
    mode: str = "softPercentage"
    threshold: float = None        # 0.1 entropy / 0.2 cross-entropy default
    keep_fraction: float = None    # 0.5 hard / 0.25 soft-percentage default
    statistic: str = "entropy"     # entropy | cross_entropy

    def __post_init__(self):
        if self.mode not in SELECTION_MODES:
            raise ConfigError(f"unknown selection mode {self.mode!r}")
        if self.statistic not in ("entropy", "cross_entropy"):
            raise ConfigError(f"unknown statistic {self.statistic!r}")
        if self.threshold is None:
            self.threshold = 0.1 if self.statistic == "entropy" else 0.2
        if self.keep_fraction is None:
            self.keep_fraction = 0.25 if self.mode == "softPercentage" else 0.5
        if self.threshold <= 0:
            raise ConfigError("threshold must be > 0")
        if not 0 < self.keep_fraction <= 1:
            raise ConfigError("keep fraction must lie in (0, 1]")


@dataclass
class SoftLabelTable:
    ids: np.ndarray          # (n,)
    probs: np.ndarray        # (n, C) rows sum to 1
    confidence: np.ndarray   # (n,) in [0, 1]
    trusted: np.ndarray      # (n,) bool

    def __len__(self):
        return len(self.ids)


def generate_synthetic_dataset(identities, per_identity, input_dim,
                               separation, seed=0):
    """Gaussian blobs: one unit direction scaled by ``separation`` per
    identity, unit isotropic noise around it."""
    if identities < 2 or per_identity < 2:
        raise ConfigError("need at least 2 identities and 2 samples each")
    rng = np.random.default_rng([seed, 0x0D])
    dirs = rng.normal(size=(identities, input_dim))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    means = separation * dirs
    labels = np.repeat(np.arange(identities), per_identity)
    feats = means[labels] + rng.normal(size=(len(labels), input_dim))
    return Dataset(features=feats, labels=labels, num_classes=identities,
                   clean_labels=labels.copy())


def inject_noise(dataset, spec):
    """Corrupt a dataset: label flips, off-manifold outliers, and 50/50
    feature mixtures with another identity. Returns (noisy dataset,
    provenance codes) with exact per-mode counts round(rate * n)."""
    n = len(dataset)
    rng = np.random.default_rng([spec.seed, 0x0E])
    n_flip = int(round(spec.flip_rate * n))
    n_out = int(round(spec.outlier_rate * n))
    n_mix = int(round(spec.mixture_rate * n))
    perm = rng.permutation(n)
    flip_idx = perm[:n_flip]
    out_idx = perm[n_flip:n_flip + n_out]
    mix_idx = perm[n_flip + n_out:n_flip + n_out + n_mix]

    feats = dataset.features.copy()
    labels = dataset.labels.copy()
    clean = dataset.labels.copy()
    mask = np.zeros(n, dtype=np.int64)

    present = np.unique(labels)
    for i in flip_idx:
        others = present[present != labels[i]]
        labels[i] = rng.choice(others)
        mask[i] = NOISE_CODES["flip"]

    # off-manifold scale: far outside anything the generator produces
    scale = 10.0 * float(np.linalg.norm(feats, axis=1).max()) if n else 1.0
    for i in out_idx:
        direction = rng.normal(size=dataset.input_dim)
        direction /= np.linalg.norm(direction)
        feats[i] = scale * direction
        mask[i] = NOISE_CODES["outlier"]

    for i in mix_idx:
        candidates = np.flatnonzero(labels != labels[i])
        j = int(rng.choice(candidates))
        feats[i] = 0.5 * (feats[i] + feats[j])
        mask[i] = NOISE_CODES["mixture"]

    noisy = Dataset(features=feats, labels=labels,
                    num_classes=dataset.num_classes, ids=dataset.ids.copy(),
                    clean_labels=clean)
    return noisy, mask


def select_confident(scores, mode, seed=0):
    """Indices of confident samples given per-sample scores (lower=better).

    hardThreshold   scores < t
    softThreshold   scores < t/2, plus a random half of the rest
    hardPercentage  lowest floor(n*keep), ties broken by index
    softPercentage  lowest floor(n*keep), plus a random third of the rest
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n = len(scores)
    rng = np.random.default_rng([seed, 0x0F])

    if mode.mode == "hardThreshold":
        chosen = np.flatnonzero(scores < mode.threshold)
    elif mode.mode == "softThreshold":
        base = np.flatnonzero(scores < mode.threshold / 2.0)
        rest = np.setdiff1d(np.arange(n), base)
        extra = rng.choice(rest, size=len(rest) // 2, replace=False) \
            if len(rest) else np.empty(0, dtype=np.int64)
        chosen = np.union1d(base, extra)
    elif mode.mode == "hardPercentage":
        k = int(n * mode.keep_fraction)
        chosen = np.sort(np.argsort(scores, kind="stable")[:k])
    else:  # softPercentage
        k = int(n * mode.keep_fraction)
        order = np.argsort(scores, kind="stable")
        base = order[:k]
        rest = order[k:]
        extra = rng.choice(rest, size=len(rest) // 3, replace=False) \
            if len(rest) else np.empty(0, dtype=np.int64)
        chosen = np.union1d(base, extra)
    chosen = np.asarray(chosen, dtype=np.int64)
    if chosen.size == 0:
        raise EmptyTrustedSetError(f"{mode.mode} selected no samples")
    return chosen


def _selection_scores(model, head, dataset, statistic):
    probs = softmax(head.logits(forward(model, dataset.features)))
    if statistic == "entropy":
        return entropy(probs)
    logp = np.log(np.clip(probs, 1e-300, None))
    return -logp[np.arange(len(dataset)), dataset.labels]


def train_teacher(model, dataset, config, selection=None, cycle_length=5,
                  head=None):
    """Self-bootstrapped CE teacher.

    Cycle 1 trains on everything; before each later cycle the current
    model re-scores all samples and only the confident subset trains. A
    ``selection`` of None is the whole-set baseline (identical to plain CE
    training). Returns (model, head, log, trusted_history) where
    trusted_history holds the index set chosen at each reselection.
    """
    if config.loss != "CE":
        raise ConfigError("teacher training uses the CE selector")
    if selection is not None and config.epochs < 2 * cycle_length:
        raise ConfigError("need at least two cycles of epochs")

    history = []
    state = {"subset": np.arange(len(dataset), dtype=np.int64)}

    def mask_fn(epoch, mdl, hd):
        if selection is None:
            return np.arange(len(dataset), dtype=np.int64)
        cycle = epoch // cycle_length
        if cycle > 0 and epoch % cycle_length == 0:
            scores = _selection_scores(mdl, hd, dataset, selection.statistic)
            try:
                chosen = select_confident(scores, selection,
                                          seed=config.seed * 1000 + cycle)
            except EmptyTrustedSetError:
                chosen = np.arange(len(dataset), dtype=np.int64)
            history.append(chosen)
            state["subset"] = chosen
        return state["subset"]

    model, head, log = train(model, dataset, config, head=head,
                             sample_mask_fn=mask_fn)
    return model, head, log, history


def generate_soft_labels(model, head, dataset, trusted_idx=None):
    """Teacher predictions as soft labels with confidence 1 - H/ln(C)."""
    probs = softmax(head.logits(forward(model, dataset.features)))
    conf = 1.0 - entropy(probs) / math.log(head.num_classes)
    conf = np.clip(conf, 0.0, 1.0)
    trusted = np.zeros(len(dataset), dtype=bool)
    if trusted_idx is None:
        trusted[:] = True
    else:
        trusted[np.asarray(trusted_idx, dtype=np.int64)] = True
    return SoftLabelTable(ids=dataset.ids.copy(), probs=probs,
                          confidence=conf, trusted=trusted)


def train_student(model, dataset, soft_table, config, head=None):
    """Point-to-set student on teacher soft labels.

    Centroid membership: argmax class of the soft label, trusted rows only,
    weighted by confidence. CE targets are the soft rows for every sample;
    every sample still anchors the point-to-set term toward its argmax
    class.
    """
    if config.loss not in ("CE-FAT", "CE-FATnorm"):
        raise ConfigError("student training uses CE-FAT or CE-FATnorm")
    return train(model, dataset, config, head=head, soft_table=soft_table)
