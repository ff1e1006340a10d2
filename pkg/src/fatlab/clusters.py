"""Per-identity cluster statistics: centroids (four options) and radii.

Centroid options:
  C1  mean of features
  C2  mean of normalized features
  C3  normalized mean of features
  C4  normalized mean of normalized features

The radius is the maximum member-to-centroid distance, which is exactly the
bound the point-to-set loss needs so that every member lies within it. For
the normalized options the members enter radius computation normalized, so
radii live in the same space as the centroid.
"""

from dataclasses import dataclass

import numpy as np

from .core import EPS_NORM, normalize_rows
from .errors import (DegenerateClusterError, DegenerateVectorError,
                     MissingClusterError)

CENTROID_OPTIONS = ("C1", "C2", "C3", "C4")
NORMALIZED_OPTIONS = ("C2", "C3", "C4")


@dataclass
class ClusterStats:
    label: int
    centroid: np.ndarray
    radius: float
    member_count: int
    confident_count: int = None

    def __post_init__(self):
        if self.confident_count is None:
            self.confident_count = self.member_count


def compute_radius(members, centroid):
    """Max distance from any member to the centroid."""
    members = np.atleast_2d(np.asarray(members, dtype=np.float64))
    if members.shape[0] == 0:
        raise MissingClusterError("radius of an empty member set")
    diffs = members - np.asarray(centroid, dtype=np.float64)
    return float(np.sqrt(np.einsum("ij,ij->i", diffs, diffs)).max())


def _centroid_of(members, option, weights):
    wsum = weights.sum()
    if wsum <= 0.0:
        raise DegenerateClusterError("cluster has zero total weight")
    mean_input = normalize_rows(members) if option in ("C2", "C4") else members
    c = (weights[:, None] * mean_input).sum(axis=0) / wsum
    if option in ("C3", "C4"):
        n = np.linalg.norm(c)
        if n <= EPS_NORM:
            raise DegenerateVectorError(
                "pre-normalization centroid has near-zero norm")
        c = c / n
    # radii live in the same space as the loss: normalized members for the
    # normalized-space options, raw members for C1
    radius_space = members if option == "C1" else normalize_rows(members)
    return c, radius_space


def compute_centroids(features, labels, option="C1", weights=None,
                      classes=None):
    """Cluster statistics per identity label.

    ``weights`` are non-negative per-sample confidences; uniform weights
    reproduce the unweighted formulas exactly. Members with zero weight are
    excluded entirely (they neither shift the centroid nor count for the
    radius). ``classes`` optionally names the full label universe; any class
    without members raises MissingClusterError.
    """
    if option not in CENTROID_OPTIONS:
        raise ValueError(f"unknown centroid option {option!r}")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if weights is None:
        weights = np.ones(len(labels))
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")

    present = np.unique(labels)
    if classes is not None:
        missing = sorted(set(int(c) for c in classes) - set(present.tolist()))
        if missing:
            raise MissingClusterError(
                f"classes without members: {missing}")
    if present.size == 0:
        raise MissingClusterError("no samples given")

    stats = {}
    for lab in present:
        idx = np.flatnonzero((labels == lab) & (weights > 0.0))
        if idx.size == 0:
            raise DegenerateClusterError(
                f"cluster {int(lab)} has zero total weight")
        mem = features[idx]
        w = weights[idx]
        centroid, radius_space = _centroid_of(mem, option, w)
        stats[int(lab)] = ClusterStats(
            label=int(lab),
            centroid=centroid,
            radius=compute_radius(radius_space, centroid),
            member_count=len(idx),
        )
    return stats


def stats_arrays(stats):
    """Pack a stats map into (labels, centroid matrix, radius vector)."""
    labs = np.array(sorted(stats), dtype=np.int64)
    cent = np.stack([stats[int(l)].centroid for l in labs])
    rad = np.array([stats[int(l)].radius for l in labs])
    return labs, cent, rad
