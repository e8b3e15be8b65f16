"""End-to-end pipelines: feature selection PSI and candidate-model selection.

Both commands follow the same protocol: a seeded shuffle splits each side
into a covariance portion and a selection-plus-inference portion, scores are
computed on the latter with one shared pair design, the score covariance is
estimated on the former, the top-k (or argmin) selection event is encoded as
linear constraints, and every selected index receives a selection-adjusted
p-value.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .data import SampleSet
from .errors import ConfigError, DataError
from .estimators import (
    EstimatorSpec,
    effective_term_count,
    h_values,
    make_pair_design,
    mmd_incomplete,
    pair_truncate,
)
from .inference import PsiResult, test_selected_features
from .kernels import BandwidthRule, KernelConfig, MedianHeuristic, resolve_bandwidth
from .screening import (
    ScreenState,
    estimate_covariance,
    per_feature_kernels,
    per_feature_scores,
    select_top_k,
)

REPORT_SCHEMA = "mmdpsi-report-1"


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared by every command; defaults follow the calibration protocol."""

    estimator: EstimatorSpec = EstimatorSpec("incomplete", r=10.0)
    k: int = 30
    alpha: float = 0.05
    cov_fraction: float = 1.0 / 3.0
    seed: int = 0
    bandwidth: BandwidthRule = MedianHeuristic()
    alternative: str = "two_sided"
    naive_mode: bool = False

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.cov_fraction < 1.0:
            raise ConfigError(
                f"cov_fraction must lie in (0, 1), got {self.cov_fraction}"
            )

    def describe(self) -> dict:
        bw = self.bandwidth
        bw_desc = (
            {"rule": "median_heuristic", "max_pairs": bw.max_pairs}
            if isinstance(bw, MedianHeuristic)
            else {"rule": "fixed", "value": bw.value}
        )
        return {
            "estimator": {
                "kind": self.estimator.kind,
                "r": self.estimator.r,
                "block_size": self.estimator.block_size,
            },
            "k": self.k,
            "alpha": self.alpha,
            "cov_fraction": self.cov_fraction,
            "seed": self.seed,
            "bandwidth": bw_desc,
            "alternative": self.alternative,
            "naive_mode": self.naive_mode,
        }


def derived_rng(seed: int, *tags: int) -> np.random.Generator:
    """Independent, order-insensitive stream for (seed, tags)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def split_paired(data: SampleSet, fraction: float, rng) -> tuple:
    """Seeded shuffle, then the first ceil(fraction * n) columns go to the
    covariance portion and the rest to selection and inference."""
    n = data.n_samples
    n_hold = int(math.ceil(fraction * n))
    if n_hold < 2 or n - n_hold < 2:
        raise DataError(
            f"cannot split {n} samples at fraction {fraction}: both portions need >= 2"
        )
    perm = np.random.default_rng(rng).permutation(n)
    return data.take(perm[:n_hold]), data.take(perm[n_hold:])


@dataclass
class FeatureRecord:
    """One row of the per-feature report table."""

    index: int
    name: str
    score: float
    rank: Optional[int] = None
    selected: bool = False
    p_value: Optional[float] = None
    pivot: Optional[float] = None
    v_minus: Optional[float] = None
    v_plus: Optional[float] = None
    significant: Optional[bool] = None
    degenerate: bool = False


@dataclass
class ExperimentReport:
    """Machine-readable result of one command run."""

    command: str
    records: list
    summary: dict
    provenance: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "records": [vars(r) for r in self.records],
            "summary": self.summary,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.payload()), sort_keys=True, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _interval_field(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _rates(results: Sequence[PsiResult], selected, true_set) -> tuple:
    """(tpr, fpr) under the report's definitions.

    TPR is the fraction of all true features flagged significant; FPR the
    fraction of selected null features flagged significant. Either is None
    when its denominator is empty.
    """
    if true_set is None:
        return None, None
    hits = sum(
        1
        for res, s in zip(results, selected)
        if s in true_set and res.significant
    )
    tpr = hits / len(true_set) if true_set else None
    null_sel = [res for res, s in zip(results, selected) if s not in true_set]
    fpr = (
        sum(1 for res in null_sel if res.significant) / len(null_sel)
        if null_sel
        else None
    )
    return tpr, fpr


@dataclass
class FeaturePsiOutcome:
    """Full pipeline state for one run, including both inference modes."""

    state: ScreenState
    results_psi: list
    results_naive: list
    kernels: list
    n_inference: int
    n_covariance: int


def run_feature_psi(
    X: SampleSet, Y: SampleSet, config: RunConfig
) -> FeaturePsiOutcome:
    """Split, score, select, and test; returns both PSI and naive results."""
    config.validate()
    if X.n_features != Y.n_features:
        raise DataError(
            f"feature dimensions differ: {X.n_features} vs {Y.n_features}"
        )
    d = X.n_features
    if d < 2:
        raise DataError("feature selection needs at least 2 features")
    if config.k >= d:
        raise ConfigError(f"k={config.k} must be smaller than d={d}")
    seed = config.seed
    X_hold, X_inf = split_paired(X, config.cov_fraction, derived_rng(seed, 1))
    Y_hold, Y_inf = split_paired(Y, config.cov_fraction, derived_rng(seed, 2))
    X_hold, Y_hold = pair_truncate(X_hold, Y_hold, derived_rng(seed, 3))
    X_inf, Y_inf = pair_truncate(X_inf, Y_inf, derived_rng(seed, 4))

    spec = config.estimator
    n_inf = X_inf.n_samples
    if spec.kind == "linear" and n_inf % 2:
        X_inf, Y_inf = X_inf.take(slice(0, n_inf - 1)), Y_inf.take(slice(0, n_inf - 1))
        n_inf -= 1
    cfgs = per_feature_kernels(X_inf, Y_inf, config.bandwidth, rng=derived_rng(seed, 5))
    design = None
    design_seed = None
    if spec.kind == "incomplete":
        design_seed = int(derived_rng(seed, 6).integers(2**31))
        design = make_pair_design(n_inf, "random", rng=design_seed, r=spec.r)
    z = per_feature_scores(X_inf, Y_inf, cfgs, spec, design=design)
    sigma = estimate_covariance(
        X_hold, Y_hold, cfgs, spec, rng=derived_rng(seed, 7), n_apply=n_inf
    )
    selected = select_top_k(z, config.k, "max")
    state = ScreenState(z, sigma, selected, "max", design_seed=design_seed)
    results_psi = test_selected_features(state, config.alpha, config.alternative)
    results_naive = test_selected_features(
        state, config.alpha, config.alternative, naive=True
    )
    return FeaturePsiOutcome(
        state, results_psi, results_naive, cfgs, n_inf, X_hold.n_samples
    )


def _feature_report(
    outcome: FeaturePsiOutcome,
    config: RunConfig,
    names,
    true_features,
    wall_clock: float,
) -> ExperimentReport:
    results = outcome.results_naive if config.naive_mode else outcome.results_psi
    state = outcome.state
    true_set = set(int(t) for t in true_features) if true_features is not None else None
    rank_of = {int(s): r for r, s in enumerate(state.selected)}
    by_index = {res.eta_index: res for res in results}
    records = []
    for i in range(len(state.z)):
        rec = FeatureRecord(index=i, name=names[i], score=float(state.z[i]))
        if i in rank_of:
            res = by_index[i]
            rec.rank = rank_of[i]
            rec.selected = True
            rec.p_value = float(res.p_value)
            rec.pivot = None if math.isnan(res.pivot) else float(res.pivot)
            rec.v_minus = _interval_field(res.v_minus)
            rec.v_plus = _interval_field(res.v_plus)
            rec.significant = bool(res.significant)
            rec.degenerate = res.degenerate
        records.append(rec)
    tpr, fpr = _rates(results, [int(s) for s in state.selected], true_set)
    significant = sorted(
        int(res.eta_index) for res in results if res.significant
    )
    summary = {
        "n_features": len(state.z),
        "n_inference_samples": outcome.n_inference,
        "n_covariance_samples": outcome.n_covariance,
        "selected": [int(s) for s in state.selected],
        "significant": significant,
        "n_significant": len(significant),
        "tpr": tpr,
        "fpr": fpr,
        "mode": "naive" if config.naive_mode else "psi",
    }
    provenance = {
        "config": config.describe(),
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "wall_clock_s": wall_clock,
    }
    return ExperimentReport("feature-psi", records, summary, provenance)


def feature_psi(
    X: SampleSet,
    Y: SampleSet,
    config: RunConfig,
    true_features=None,
) -> ExperimentReport:
    """The feature-selection PSI pipeline as one call.

    ``true_features`` (indices) enables TPR/FPR in the summary; leave None
    for real data without ground truth.
    """
    t0 = time.perf_counter()
    outcome = run_feature_psi(X, Y, config)
    return _feature_report(
        outcome, config, X.feature_names, true_features, time.perf_counter() - t0
    )


NEAR_TIE_TOL = 1e-9


def sample_select(
    candidates: Sequence[SampleSet],
    reference: SampleSet,
    config: RunConfig,
    candidate_names: Optional[Sequence[str]] = None,
) -> ExperimentReport:
    """Pick the candidate set closest to the reference and PSI-test it.

    Each candidate's divergence to the reference is one coordinate of the
    score vector; the winner is the argmin, its selection event the flipped
    comparisons against every other candidate. All sets are truncated to a
    common sample count, and the kernel bandwidth is resolved once on the
    pooled inference data.
    """
    t0 = time.perf_counter()
    config.validate()
    if len(candidates) < 2:
        raise DataError("sample selection needs at least 2 candidates")
    if config.estimator.kind not in ("incomplete", "linear"):
        raise ConfigError(
            "sample selection supports the incomplete and linear estimators"
        )
    dim = reference.n_features
    for i, cand in enumerate(candidates):
        if cand.n_features != dim:
            raise DataError(
                f"candidate {i} has {cand.n_features} features, reference has {dim}"
            )
    names = list(candidate_names or (f"candidate{i}" for i in range(len(candidates))))
    seed = config.seed

    common_n = min([reference.n_samples] + [c.n_samples for c in candidates])
    sets = []
    for i, cand in enumerate([reference] + list(candidates)):
        if cand.n_samples > common_n:
            keep = np.sort(
                derived_rng(seed, 10, i).permutation(cand.n_samples)[:common_n]
            )
            cand = cand.take(keep)
        sets.append(cand)
    reference, candidates = sets[0], sets[1:]

    ref_hold, ref_inf = split_paired(reference, config.cov_fraction, derived_rng(seed, 11))
    # one shuffle pattern for every candidate, so identical candidate sets
    # produce identical splits and hence exact score ties
    cand_splits = [
        split_paired(c, config.cov_fraction, derived_rng(seed, 12))
        for c in candidates
    ]
    n_inf = ref_inf.n_samples
    n_hold = ref_hold.n_samples
    spec = config.estimator
    if spec.kind == "linear":
        if n_inf % 2:
            ref_inf = ref_inf.take(slice(0, n_inf - 1))
            cand_splits = [(h, inf.take(slice(0, n_inf - 1))) for h, inf in cand_splits]
            n_inf -= 1

    pooled = np.hstack([ref_inf.values] + [inf.values for _, inf in cand_splits])
    bandwidth = (
        config.bandwidth
        if isinstance(config.bandwidth, KernelConfig)
        else KernelConfig(
            resolve_bandwidth(pooled, config.bandwidth, derived_rng(seed, 13))
        )
    )

    if spec.kind == "incomplete":
        design_seed = int(derived_rng(seed, 14).integers(2**31))
        design_inf = make_pair_design(n_inf, "random", rng=design_seed, r=spec.r)
        r_cov = max(spec.r, 10.0)
        design_hold = make_pair_design(
            n_hold, "random", rng=derived_rng(seed, 15), r=r_cov
        )
    else:
        design_seed = None
        design_inf = make_pair_design(n_inf, "linear")
        design_hold = make_pair_design(
            n_hold, "random", rng=derived_rng(seed, 15), r=10.0
        )

    n_cand = len(candidates)
    z = np.empty(n_cand)
    H = np.empty((n_cand, len(design_hold)))
    for i, (c_hold, c_inf) in enumerate(cand_splits):
        z[i] = mmd_incomplete(c_inf, ref_inf, bandwidth, design_inf).value
        H[i] = h_values(c_hold, ref_hold, bandwidth, design_hold)
    sigma = np.atleast_2d(np.cov(H, ddof=1)) / effective_term_count(spec, n_inf)
    sigma = sigma + (1e-10 * np.trace(sigma) / n_cand) * np.eye(n_cand)

    selected = select_top_k(z, 1, "min")
    state = ScreenState(z, sigma, selected, "min", design_seed=design_seed)
    results = test_selected_features(
        state, config.alpha, config.alternative, naive=config.naive_mode
    )
    winner = results[0]
    order = np.argsort(z, kind="stable")
    gap = float(z[order[1]] - z[order[0]]) if n_cand >= 2 else math.inf
    near_tie = winner.degenerate or gap <= NEAR_TIE_TOL * max(1.0, abs(float(z[order[0]])))

    records = []
    ranks = {int(s): r for r, s in enumerate(order)}
    for i in range(n_cand):
        rec = FeatureRecord(index=i, name=names[i], score=float(z[i]), rank=ranks[i])
        if i == int(selected[0]):
            rec.selected = True
            rec.p_value = float(winner.p_value)
            rec.pivot = None if math.isnan(winner.pivot) else float(winner.pivot)
            rec.v_minus = _interval_field(winner.v_minus)
            rec.v_plus = _interval_field(winner.v_plus)
            rec.significant = bool(winner.significant)
            rec.degenerate = winner.degenerate
        records.append(rec)
    records.sort(key=lambda r: r.rank)
    summary = {
        "n_candidates": n_cand,
        "n_inference_samples": n_inf,
        "n_covariance_samples": n_hold,
        "selected": names[int(selected[0])],
        "selected_index": int(selected[0]),
        "p_value": float(winner.p_value),
        "significant": bool(winner.significant),
        "near_tie": bool(near_tie),
        "ranking": [
            {"name": names[int(i)], "score": float(z[int(i)])} for i in order
        ],
        "mode": "naive" if config.naive_mode else "psi",
    }
    provenance = {
        "config": config.describe(),
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "wall_clock_s": time.perf_counter() - t0,
    }
    return ExperimentReport("sample-select", records, summary, provenance)
