"""fatlab: a metric-learning laboratory around the fast approximated
triplet (FAT) loss, its triplet baselines, and noisy-label distillation."""

from .backend import active_backend_name, available_backends
from .clusters import ClusterStats, compute_centroids, compute_radius
from .core import entropy, euclidean_distance, normalize, softmax
from .data import Dataset, split_query_gallery
from .losses import (LossConfig, LossOutput, cross_entropy, fat_loss,
                     fat_loss_normalized, hybrid_loss, p2s_loss,
                     triplet_batch_all, triplet_batch_hard)
from .mining import BatchSpec, sample_batches, select_negatives
from .model import ClassifierHead, EmbeddingModel, backward, forward, sgd_step

__version__ = "0.1.0"

__all__ = [
    "ClusterStats", "compute_centroids", "compute_radius",
    "entropy", "euclidean_distance", "normalize", "softmax",
    "Dataset", "split_query_gallery",
    "LossConfig", "LossOutput", "cross_entropy", "fat_loss",
    "fat_loss_normalized", "hybrid_loss", "p2s_loss",
    "triplet_batch_all", "triplet_batch_hard",
    "BatchSpec", "sample_batches", "select_negatives",
    "ClassifierHead", "EmbeddingModel", "backward", "forward", "sgd_step",
    "active_backend_name", "available_backends",
]
