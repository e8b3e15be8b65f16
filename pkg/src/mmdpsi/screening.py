"""Per-feature MMD scoring, score covariance, and top-k selection events.

The selection event "these k features have the largest scores" is a set of
k(d-k) pairwise linear constraints A z <= 0, each row carrying exactly two
nonzeros. :class:`SelectionConstraints` stores rows sparsely as (s, l) index
pairs plus a direction sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .data import ArrayLike, as_matrix
from .errors import ConfigError, DataError
from .estimators import (
    EstimatorSpec,
    PairDesign,
    effective_term_count,
    evaluate_estimator,
    h_values,
    make_pair_design,
)
from .kernels import BandwidthRule, KernelConfig, resolve_bandwidth

DIRECTIONS = ("max", "min")

KernelLike = Union[KernelConfig, BandwidthRule, Sequence[KernelConfig]]


@dataclass(frozen=True)
class SelectionConstraints:
    """Rows of A in the selection event A z <= 0.

    Row t encodes the comparison between selected index ``pairs[t, 0]`` and
    unselected index ``pairs[t, 1]``: for direction "max" the row is -1 at
    the selected position and +1 at the unselected one; "min" flips signs.
    """

    pairs: np.ndarray
    d: int
    direction: str = "max"

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= self.d):
            raise ConfigError(f"constraint indices out of range for d={self.d}")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def sign(self) -> int:
        return 1 if self.direction == "max" else -1

    def dot(self, v: np.ndarray) -> np.ndarray:
        """A @ v without materializing A."""
        v = np.asarray(v, dtype=float)
        if len(self) == 0:
            return np.empty(0)
        return self.sign * (v[self.pairs[:, 1]] - v[self.pairs[:, 0]])

    def matrix(self) -> np.ndarray:
        """Dense A, mostly for tests and debugging."""
        A = np.zeros((len(self), self.d))
        rows = np.arange(len(self))
        A[rows, self.pairs[:, 0]] = -self.sign
        A[rows, self.pairs[:, 1]] = self.sign
        return A


def empty_constraints(d: int, direction: str = "max") -> SelectionConstraints:
    """No selection event; truncation degenerates to the whole real line."""
    return SelectionConstraints(np.empty((0, 2), dtype=np.int64), d, direction)


def select_top_k(z: np.ndarray, k: int, direction: str = "max") -> np.ndarray:
    """Indices of the k largest (or smallest) entries, in rank order.

    Ties are broken toward the lower index, which keeps the non-strict
    selection-event inequalities valid.
    """
    z = np.asarray(z, dtype=float).ravel()
    d = z.shape[0]
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}")
    if not 1 <= k < d:
        raise ConfigError(f"need 1 <= k < d, got k={k}, d={d}")
    keys = -z if direction == "max" else z
    order = np.argsort(keys, kind="stable")
    return order[:k]


def selection_constraints(
    selected, d: int, direction: str = "max"
) -> SelectionConstraints:
    """All k(d-k) pairwise rows comparing selected against unselected indices."""
    selected = np.asarray(selected, dtype=np.int64).ravel()
    mask = np.zeros(d, dtype=bool)
    mask[selected] = True
    others = np.nonzero(~mask)[0]
    s = np.repeat(selected, others.shape[0])
    l = np.tile(others, selected.shape[0])
    return SelectionConstraints(np.column_stack((s, l)), d, direction)


@dataclass(frozen=True)
class ScreenState:
    """Everything the inference stage needs about one screening pass."""

    z: np.ndarray
    sigma: np.ndarray
    selected: np.ndarray
    direction: str = "max"
    design_seed: Optional[int] = None

    def constraints(self) -> SelectionConstraints:
        return selection_constraints(self.selected, self.z.shape[0], self.direction)


def per_feature_kernels(
    X: ArrayLike, Y: ArrayLike, kernel: KernelLike, rng=None
) -> list:
    """One resolved KernelConfig per feature.

    A bandwidth rule is resolved independently on each pooled 1-d feature
    slice, so every coordinate gets a scale-appropriate kernel. A single
    KernelConfig is broadcast; a sequence is validated and passed through.
    """
    x, y = as_matrix(X), as_matrix(Y)
    d = x.shape[0]
    if isinstance(kernel, KernelConfig):
        return [kernel] * d
    if isinstance(kernel, (list, tuple)):
        if len(kernel) != d:
            raise ConfigError(f"{len(kernel)} kernel configs for {d} features")
        return list(kernel)
    gen = np.random.default_rng(rng)
    pooled = np.hstack((x, y))
    return [
        KernelConfig(resolve_bandwidth(pooled[s : s + 1], kernel, gen))
        for s in range(d)
    ]


def per_feature_scores(
    X: ArrayLike,
    Y: ArrayLike,
    kernel: KernelLike,
    spec: EstimatorSpec,
    rng=None,
    design: Optional[PairDesign] = None,
) -> np.ndarray:
    """Score vector z: the chosen estimator applied to each feature slice.

    Design-based estimators reuse the same pair design across all features,
    so the cross-feature covariance of z is meaningful.
    """
    x, y = as_matrix(X), as_matrix(Y)
    if x.shape[0] != y.shape[0]:
        raise DataError(f"feature dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    cfgs = per_feature_kernels(x, y, kernel, rng=rng)
    if design is None and spec.kind == "incomplete":
        if x.shape[1] != y.shape[1]:
            raise DataError("paired scoring requires equal sample counts")
        design = make_pair_design(x.shape[1], "random", rng=rng, r=spec.r)
    d = x.shape[0]
    z = np.empty(d)
    for s in range(d):
        est = evaluate_estimator(
            x[s : s + 1], y[s : s + 1], cfgs[s], spec, design=design
        )
        z[s] = est.value
    return z


def estimate_covariance(
    X_hold: ArrayLike,
    Y_hold: ArrayLike,
    kernel: KernelLike,
    spec: EstimatorSpec,
    rng=None,
    design: Optional[PairDesign] = None,
    n_apply: Optional[int] = None,
    scale_terms: Optional[int] = None,
    ridge: float = 1e-10,
) -> np.ndarray:
    """Plug-in covariance of the score vector from held-out data.

    Stacks the per-pair h values of every feature over one shared random
    pair design into a (d, ell) matrix, takes its empirical covariance, and
    divides by the number of independent h terms behind each score: by
    default the design size used here, or the count implied by ``spec`` at
    ``n_apply`` samples (the size of the split the scores come from). This
    is the null-regime plug-in; the first-projection inflation the scores
    pick up when the distributions actually differ is deliberately ignored.
    A relative ridge keeps the result usable when features are
    near-duplicates.
    """
    x, y = as_matrix(X_hold), as_matrix(Y_hold)
    if x.shape[0] != y.shape[0]:
        raise DataError(f"feature dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[1] != y.shape[1]:
        raise DataError("covariance estimation requires equal sample counts")
    n = x.shape[1]
    d = x.shape[0]
    gen = np.random.default_rng(rng)
    cfgs = per_feature_kernels(x, y, kernel, rng=gen)
    if design is None:
        r_cov = max(spec.r, 10.0) if spec.kind == "incomplete" else 10.0
        design = make_pair_design(n, "random", rng=gen, r=r_cov)
    if len(design) < 2:
        raise DataError("covariance estimation needs at least 2 design pairs")
    H = np.empty((d, len(design)))
    for s in range(d):
        H[s] = h_values(x[s : s + 1], y[s : s + 1], cfgs[s], design)
    if scale_terms is None:
        scale_terms = (
            len(design) if n_apply is None else effective_term_count(spec, n_apply)
        )
    if scale_terms < 1:
        raise ConfigError(f"scale_terms must be positive, got {scale_terms}")
    sigma = np.atleast_2d(np.cov(H, ddof=1)) / scale_terms
    if ridge:
        sigma = sigma + (ridge * np.trace(sigma) / d) * np.eye(d)
    return sigma
