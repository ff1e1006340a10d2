"""Scalar/vector primitives shared by every module.

All functions are pure and operate on float64 numpy arrays; callers may
pass any sequence convertible by ``np.asarray``.
"""

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateVectorError, DimensionMismatchError

# Below this, a vector has no usable direction (double precision limit).
EPS_NORM = 1e-12


def _as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr


def euclidean_distance(u, v):
    """L2 distance between two equal-dimension vectors."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return float(np.linalg.norm(u - v))


def normalize(v):
    """v / ||v||; raises DegenerateVectorError when ||v|| <= EPS_NORM."""
    v = _as_vector(v)
    n = np.linalg.norm(v)
    if n <= EPS_NORM:
        raise DegenerateVectorError(f"cannot normalize vector with norm {n!r}")
    return v / n


def normalize_rows(x):
    """Row-wise normalize a 2-d array; any near-zero row is an error."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms <= EPS_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateVectorError(f"row {bad} has near-zero norm")
    return x / norms[:, None]


def softmax(logits):
    """Numerically stable softmax (max subtraction)."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def entropy(p):
    """Shannon entropy -sum(p ln p) with 0 ln 0 := 0."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("not a probability vector")
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return float(-terms.sum()) if p.ndim == 1 else -terms.sum(axis=-1)


def pairwise_distances(x, y=None):
    """Euclidean distance matrix between rows of x and rows of y (or x)."""
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(
            f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return cdist(x, y)


def distance_gradient(u, v):
    """Gradient of ||u - v|| w.r.t. u; zero subgradient when u == v."""
    diff = u - v
    n = np.linalg.norm(diff)
    if n <= EPS_NORM:
        return np.zeros_like(diff)
    return diff / n
