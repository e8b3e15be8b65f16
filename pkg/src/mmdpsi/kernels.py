"""Gaussian kernel, bandwidth selection, and the four-term MMD kernel h.

The h kernel acts on paired points u = [x; y] built by zipping the two
samples, and is the building block of every estimator in this package:

    h(u, u') = k(x, x') + k(y, y') - k(x, y') - k(x', y)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import ArrayLike, as_matrix
from .errors import ConfigError

BANDWIDTH_FLOOR = 1e-8


@dataclass(frozen=True)
class FixedBandwidth:
    """Use the given Gaussian width as-is."""

    value: float


@dataclass(frozen=True)
class MedianHeuristic:
    """Median pairwise distance of the pooled sample, subsampled for speed."""

    max_pairs: int = 10000


BandwidthRule = Union[FixedBandwidth, MedianHeuristic]


@dataclass(frozen=True)
class KernelConfig:
    """A resolved Gaussian kernel: k(a, b) = exp(-||a - b||^2 / (2 bandwidth^2))."""

    bandwidth: float

    def __post_init__(self):
        bw = float(self.bandwidth)
        if not math.isfinite(bw) or bw <= 0.0:
            raise ConfigError(f"bandwidth must be a positive real, got {bw!r}")
        object.__setattr__(self, "bandwidth", bw)


@dataclass(frozen=True)
class PairedPoint:
    """One zipped observation u = [x; y] from the two samples."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ConfigError(
                f"paired point components differ in dimension: {x.shape} vs {y.shape}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def resolve_bandwidth(pooled: ArrayLike, rule: BandwidthRule, rng=None) -> float:
    """Resolve a bandwidth rule against pooled samples.

    For the median heuristic, distances are taken over all distinct column
    pairs when there are at most ``max_pairs`` of them, otherwise over
    ``max_pairs`` pairs sampled uniformly. The result is floored at a small
    positive constant so constant features still yield a usable kernel.
    """
    if isinstance(rule, FixedBandwidth):
        cfg = KernelConfig(rule.value)  # validates positivity
        return cfg.bandwidth
    if not isinstance(rule, MedianHeuristic):
        raise ConfigError(f"unknown bandwidth rule: {rule!r}")
    if rule.max_pairs < 1:
        raise ConfigError("median heuristic needs max_pairs >= 1")

    arr = as_matrix(pooled)
    n = arr.shape[1]
    if n < 2:
        raise ConfigError("median heuristic needs at least 2 pooled samples")
    total = n * (n - 1) // 2
    if total <= rule.max_pairs:
        i, j = np.triu_indices(n, k=1)
    else:
        gen = np.random.default_rng(rng)
        i = gen.integers(0, n, size=rule.max_pairs)
        j = gen.integers(0, n - 1, size=rule.max_pairs)
        j = j + (j >= i)
    diffs = arr[:, i] - arr[:, j]
    dists = np.sqrt(np.sum(diffs * diffs, axis=0))
    return max(float(np.median(dists)), BANDWIDTH_FLOOR)


def gaussian_kernel(a, b, cfg: KernelConfig) -> float:
    """Gaussian kernel between two vectors; lies in (0, 1]."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.exp(-np.dot(diff, diff) / (2.0 * cfg.bandwidth**2)))


def h_kernel(u: PairedPoint, v: PairedPoint, cfg: KernelConfig) -> float:
    """Four-term MMD U-statistic kernel; lies in [-2, 2]."""
    if u.x.shape != v.x.shape:
        raise ConfigError(
            f"paired points differ in dimension: {u.x.shape} vs {v.x.shape}"
        )
    # grouping the cross terms keeps h(u, v) == h(v, u) bit-exact
    same = gaussian_kernel(u.x, v.x, cfg) + gaussian_kernel(u.y, v.y, cfg)
    cross = gaussian_kernel(u.x, v.y, cfg) + gaussian_kernel(v.x, u.y, cfg)
    return same - cross


def gaussian_from_sqdist(d2: np.ndarray, bandwidth: float) -> np.ndarray:
    """Vectorized kernel evaluation from precomputed squared distances."""
    return np.exp(d2 / (-2.0 * bandwidth**2))
