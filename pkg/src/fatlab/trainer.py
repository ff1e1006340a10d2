"""Epoch-driven training loop.

Per epoch: refresh cluster statistics from the current embeddings (for the
point-to-set losses), iterate identity-balanced batches, evaluate the
selected loss, backpropagate and apply SGD. Deterministic under the config
seed; centroids and radii are constants between refreshes.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .clusters import compute_centroids
from .errors import ConfigError, TrainingDivergenceError
from .losses import (LOSS_SELECTORS, LossConfig, cross_entropy,
                     point_to_set_batch, triplet_batch_all,
                     triplet_batch_hard)
from .mining import BatchSpec, sample_batches, select_negatives
from .model import ClassifierHead, backward, forward, head_sgd_step, sgd_step

FAT_FAMILY = ("CE-FAT", "CE-FATnorm", "CE-P2S", "CE-P2Snorm")
CE_FAMILY = ("CE",) + FAT_FAMILY


@dataclass
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.05
    schedule: str = "constant"          # constant | step (x0.1 at 2/3)
    loss: str = "CE-FAT"
    loss_config: LossConfig = None
    batch: BatchSpec = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be > 0")
        if self.schedule not in ("constant", "step"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.loss not in LOSS_SELECTORS:
            raise ConfigError(f"unknown loss selector {self.loss!r}")
        normalized = self.loss.endswith("norm")
        if self.loss_config is None:
            self.loss_config = LossConfig(normalized=normalized)
        if self.loss in FAT_FAMILY and self.loss_config.normalized != normalized:
            raise ConfigError(
                f"loss {self.loss} requires normalized={normalized}")
        if self.batch is None:
            self.batch = BatchSpec(seed=self.seed)

    def lr_at(self, epoch):
        lr = self.learning_rate
        if self.schedule == "step" and epoch >= (2 * self.epochs) // 3:
            lr *= 0.1
        return lr


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    hinge: float
    ce: float
    radii: float
    active_fraction: float
    dropped_classes: int
    refreshed: bool
    refresh_seconds: float
    step_seconds: float


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    @property
    def losses(self):
        return [r.loss for r in self.records]

    @property
    def refresh_count(self):
        return sum(1 for r in self.records if r.refreshed)


def embed_dataset(model, dataset):
    """Embed every sample; row i is forward(model, sample i)."""
    feats = dataset.features if hasattr(dataset, "features") else \
        np.asarray(dataset, dtype=np.float64)
    if len(feats) == 0:
        return np.zeros((0, model.embedding_dim))
    return forward(model, feats)


def _normalize_rows_safe(x):
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms <= 1e-12):
        raise TrainingDivergenceError("embedding collapsed to zero norm")
    return x / norms[:, None]


class _SoftTargets:
    """Resolved training targets from a soft-label table."""

    def __init__(self, table):
        self.probs = np.asarray(table.probs, dtype=np.float64)
        self.confidence = np.asarray(table.confidence, dtype=np.float64)
        self.trusted = np.asarray(table.trusted, dtype=bool)
        self.hard = self.probs.argmax(axis=1).astype(np.int64)


def train(model, dataset, config, head=None, sample_mask_fn=None,
          soft_table=None):
    """Train ``model`` (and a classifier head for CE losses) on ``dataset``.

    ``sample_mask_fn(epoch, model, head) -> index array`` restricts each
    epoch to a training subset (used by the teacher bootstrap); default is
    the full dataset. ``soft_table`` switches to soft-label training: batch
    identities and point-to-set membership come from the argmax class,
    centroid estimation is restricted to trusted rows weighted by
    confidence, and the CE targets are the soft rows themselves.

    Returns (model, head, TrainLog).
    """
    selector = config.loss
    lcfg = config.loss_config
    needs_head = selector in CE_FAMILY
    needs_clusters = selector in FAT_FAMILY
    normalized = lcfg.normalized

    soft = _SoftTargets(soft_table) if soft_table is not None else None
    eff_labels = soft.hard if soft is not None else dataset.labels
    num_classes = dataset.num_classes

    if needs_head and head is None:
        head = ClassifierHead.create(model.embedding_dim, num_classes,
                                     seed=config.seed)
    log = TrainLog()

    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        if sample_mask_fn is not None:
            train_idx = np.asarray(sample_mask_fn(epoch, model, head),
                                   dtype=np.int64)
        else:
            train_idx = np.arange(len(dataset), dtype=np.int64)

        stats = None
        dropped = 0
        refresh_seconds = 0.0
        if needs_clusters:
            t0 = time.perf_counter()
            emb_all = embed_dataset(model, dataset)
            if soft is None:
                stats = compute_centroids(emb_all, eff_labels,
                                          lcfg.centroid_option)
            else:
                keep = soft.trusted
                stats = compute_centroids(emb_all[keep], soft.hard[keep],
                                          lcfg.centroid_option,
                                          weights=soft.confidence[keep])
                dropped = num_classes - len(stats)
            refresh_seconds = time.perf_counter() - t0

        batches = sample_batches(eff_labels[train_idx], config.batch,
                                 epoch=epoch)
        t1 = time.perf_counter()
        sums = {"loss": 0.0, "hinge": 0.0, "ce": 0.0, "radii": 0.0}
        active = total = 0
        for b_no, rel in enumerate(batches):
            abs_idx = train_idx[rel]
            xb = dataset.features[abs_idx]
            yb = eff_labels[abs_idx]
            emb = forward(model, xb)
            if not np.all(np.isfinite(emb)):
                raise TrainingDivergenceError(
                    f"non-finite embeddings at epoch {epoch}, batch {b_no}")

            hinge_val = ce_val = radii_val = 0.0
            grad_emb = np.zeros_like(emb)

            if selector in ("tripletBatchAll", "tripletBatchHard"):
                if selector == "tripletBatchAll":
                    out = triplet_batch_all(
                        emb, yb, lcfg.margin,
                        average_active_only=lcfg.average_active_only)
                else:
                    out = triplet_batch_hard(emb, yb, lcfg.margin)
                hinge_val = out.value
                grad_emb += out.gradients
                active += out.active_count
                total += out.term_count
            elif needs_clusters:
                sel_emb = _normalize_rows_safe(emb) if normalized else emb
                kept, own_c, own_r, neg_c, neg_r, starts, neg_radsum = \
                    [], [], [], [], [], [0], []
                for i in range(len(abs_idx)):
                    lab = int(yb[i])
                    if lab not in stats:
                        continue
                    negs = select_negatives(lab, stats,
                                            lcfg.negative_strategy,
                                            batch_labels=yb,
                                            anchor_embedding=sel_emb[i])
                    kept.append(i)
                    own_c.append(stats[lab].centroid)
                    own_r.append(stats[lab].radius)
                    neg_c.extend(s.centroid for s in negs)
                    neg_r.extend(s.radius for s in negs)
                    starts.append(starts[-1] + len(negs))
                    neg_radsum.append(np.mean([s.radius for s in negs]))
                if kept:
                    include_radii = selector in ("CE-FAT", "CE-FATnorm")
                    out = point_to_set_batch(
                        emb[kept], np.stack(own_c), np.array(own_r),
                        np.stack(neg_c), np.array(neg_r),
                        np.array(starts, dtype=np.int64), lcfg.margin,
                        normalized=normalized, include_radii=include_radii)
                    hinge_val = out.value
                    grad_emb[kept] += out.gradients
                    active += out.active_count
                    total += out.term_count
                    radii_val = float(np.mean(np.array(own_r) +
                                              np.array(neg_radsum)))

            head_grads = None
            if needs_head:
                logits = head.logits(emb)
                if not np.all(np.isfinite(logits)):
                    raise TrainingDivergenceError(
                        f"non-finite logits at epoch {epoch}, batch {b_no}")
                targets = soft.probs[abs_idx] if soft is not None else yb
                ce_out = cross_entropy(logits, targets)
                ce_val = ce_out.value
                weight = 1.0 if selector == "CE" else lcfg.hybrid_weight
                head_grads, d_emb_ce = head.backward(emb, ce_out.gradients)
                grad_emb += weight * d_emb_ce
                head_grads = {k: weight * v for k, v in head_grads.items()}

            if selector == "CE":
                batch_loss = ce_val
            elif selector in ("tripletBatchAll", "tripletBatchHard"):
                batch_loss = hinge_val
            else:
                batch_loss = hinge_val + lcfg.hybrid_weight * ce_val
            if not np.isfinite(batch_loss):
                raise TrainingDivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {b_no}")

            bundle = backward(model, xb, grad_emb)
            sgd_step(model, bundle, lr)
            if head_grads is not None:
                head_sgd_step(head, head_grads, lr)

            sums["loss"] += batch_loss
            sums["hinge"] += hinge_val
            sums["ce"] += ce_val
            sums["radii"] += radii_val

        nb = max(len(batches), 1)
        log.records.append(EpochRecord(
            epoch=epoch,
            loss=sums["loss"] / nb,
            hinge=sums["hinge"] / nb,
            ce=sums["ce"] / nb,
            radii=sums["radii"] / nb,
            active_fraction=active / total if total else 0.0,
            dropped_classes=dropped,
            refreshed=needs_clusters,
            refresh_seconds=refresh_seconds,
            step_seconds=time.perf_counter() - t1,
        ))
    return model, head, log


def clone_config(config, **overrides):
    """TrainConfig copy with field overrides (loss_config/batch are shared)."""
    return replace(config, **overrides)
