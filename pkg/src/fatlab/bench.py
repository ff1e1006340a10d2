"""Loss-computation scaling benchmark.

Times one full loss evaluation over all N samples at each size and fits
the log-log slope. For the point-to-set loss the timed region is the
per-epoch loss-kernel cost: centroid + radius refresh plus every anchor
term against its single hard negative cluster; the hard-negative *map*
(like data generation) is untimed setup. Triplet variants time the pair
distance matrix plus the full triple/pair enumeration.

Timing uses a warmup and min-over-repeats for the fit (robust to scheduler
noise); the report also carries mean and std per size.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .backend import get_backend
from .core import pairwise_distances
from .errors import ConfigError

BENCH_LOSSES = ("tripletBatchAll", "tripletBatchHard", "FAT")
MIN_RELIABLE_SECONDS = 100e-6


@dataclass
class BenchReport:
    loss: str
    backend: str
    sizes: list
    mean_seconds: list
    std_seconds: list
    min_seconds: list
    slope: float
    repeats: int
    k_per_identity: int
    dim: int
    seed: int
    inner_loops: list = field(default_factory=list)

    def to_dict(self):
        return {
            "loss": self.loss, "backend": self.backend,
            "sizes": list(self.sizes),
            "mean_seconds": list(self.mean_seconds),
            "std_seconds": list(self.std_seconds),
            "min_seconds": list(self.min_seconds),
            "slope": self.slope, "repeats": self.repeats,
            "k_per_identity": self.k_per_identity, "dim": self.dim,
            "seed": self.seed, "inner_loops": list(self.inner_loops),
        }


def fit_loglog_slope(sizes, times):
    """Least-squares slope of ln(time) against ln(size)."""
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def _bench_embeddings(n, k, dim, seed):
    """Clustered embeddings with exactly k samples per identity, labels
    grouped contiguously."""
    p = n // k
    rng = np.random.default_rng([seed, n, 0xB3])
    dirs = rng.normal(size=(p, dim))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    labels = np.repeat(np.arange(p, dtype=np.int64), k)
    x = 10.0 * dirs[labels] + rng.normal(size=(n, dim))
    return np.ascontiguousarray(x), labels


def _grouped_stats(x, starts, counts):
    """C1 centroids and max radii for label-contiguous data."""
    cent = np.add.reduceat(x, starts, axis=0) / counts[:, None]
    gidx = np.repeat(np.arange(len(starts)), counts)
    resid = x - cent[gidx]
    d_own = np.sqrt(np.einsum("ij,ij->i", resid, resid))
    radii = np.maximum.reduceat(d_own, starts)
    return cent, radii, gidx


def _nearest_other_rows(cent):
    """Exact nearest other row per row (BLAS screen, exact verify)."""
    p = len(cent)
    sq = np.einsum("ij,ij->i", cent, cent)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (cent @ cent.T)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    best = order[:, 0].copy()
    rows = np.arange(p)
    gap = d2[rows, order[:, 1]] - d2[rows, best]
    for i in np.flatnonzero(gap <= 1e-7 * np.maximum(1.0, np.abs(d2[rows, best]))):
        diff = cent - cent[i]
        e2 = np.einsum("ij,ij->i", diff, diff)
        e2[i] = np.inf
        best[i] = int(np.argmin(e2))
    return best


def full_triplet_batch_all_loss(x, labels, margin, backend="auto"):
    """Value of the batch-all triplet loss over the whole set."""
    kern = get_backend(backend)
    dist = pairwise_distances(x)
    hinge_sum, _, total, _, _ = kern.triplet_all_terms(
        dist, labels, float(margin), False)
    return hinge_sum / total if total else 0.0


def full_triplet_batch_hard_loss(x, labels, margin, backend="auto"):
    """Value of the batch-hard triplet loss over the whole set."""
    kern = get_backend(backend)
    dist = pairwise_distances(x)
    h, _, _ = kern.triplet_hard_terms(dist, labels, float(margin))
    return float(np.mean(h))


def full_fat_loss(x, starts, counts, negmap, margin, backend="auto"):
    """Per-epoch point-to-set loss over the whole set: recomputes centroids
    and radii, then evaluates every anchor against its precomputed hard
    negative cluster."""
    kern = get_backend(backend)
    cent, radii, gidx = _grouped_stats(x, starts, counts)
    neg = negmap[gidx]
    n = len(x)
    per, _, _, _ = kern.fat_terms(
        x, np.ascontiguousarray(cent[gidx]), radii[gidx],
        np.ascontiguousarray(cent[neg]), radii[neg],
        np.arange(n + 1, dtype=np.int64), float(margin), True, False)
    return float(per.mean())


def _make_timed_callable(loss, x, labels, margin, backend):
    if loss == "tripletBatchAll":
        return lambda: full_triplet_batch_all_loss(x, labels, margin, backend)
    if loss == "tripletBatchHard":
        return lambda: full_triplet_batch_hard_loss(x, labels, margin, backend)
    if loss == "FAT":
        starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
        counts = np.diff(np.r_[starts, len(labels)])
        cent, _, _ = _grouped_stats(x, starts, counts)
        negmap = _nearest_other_rows(cent)
        return lambda: full_fat_loss(x, starts, counts, negmap, margin,
                                     backend)
    raise ConfigError(f"unknown benchmark loss {loss!r}")


def _time_callable(fn, repeats):
    fn()  # warmup: allocations, code paths
    inner = 1
    t0 = time.perf_counter()
    fn()
    once = time.perf_counter() - t0
    if once < MIN_RELIABLE_SECONDS:
        inner = int(np.ceil(MIN_RELIABLE_SECONDS / max(once, 1e-9)))
        warnings.warn(
            f"timer resolution: single run {once * 1e6:.1f} us < 100 us; "
            f"looping x{inner}", stacklevel=2)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        samples.append((time.perf_counter() - t0) / inner)
    return samples, inner


def benchmark_loss_scaling(loss, sizes, repeats=5, seed=0, k_per_identity=8,
                           dim=16, margin=1.0, backend="auto"):
    """Time one full loss evaluation at each dataset size and fit the
    log-log scaling slope."""
    if loss not in BENCH_LOSSES:
        raise ConfigError(f"loss must be one of {BENCH_LOSSES}")
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ConfigError("need at least 2 sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sizes must be strictly increasing")
    kern = get_backend(backend)

    means, stds, mins, inners = [], [], [], []
    for n in sizes:
        if n % k_per_identity:
            raise ConfigError(
                f"size {n} not divisible by k={k_per_identity}")
        x, labels = _bench_embeddings(n, k_per_identity, dim, seed)
        fn = _make_timed_callable(loss, x, labels, margin, backend)
        samples, inner = _time_callable(fn, repeats)
        means.append(float(np.mean(samples)))
        stds.append(float(np.std(samples)))
        mins.append(float(np.min(samples)))
        inners.append(inner)
    return BenchReport(
        loss=loss, backend=kern.BACKEND_NAME, sizes=sizes,
        mean_seconds=means, std_seconds=stds, min_seconds=mins,
        slope=fit_loglog_slope(sizes, mins), repeats=repeats,
        k_per_identity=k_per_identity, dim=dim, seed=seed,
        inner_loops=inners)
