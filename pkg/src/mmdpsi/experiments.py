"""Monte-Carlo experiment suites and the timing benchmark.

Every suite returns tidy long-format rows (experiment, estimator, n, trial,
metric, value) ready for CSV emission and external plotting; aggregate rows
leave the trial column empty. Per-trial seeds derive from (seed, trial), so
results are independent of execution order.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .data import SampleSet
from .errors import ConfigError
from .estimators import (
    EstimatorSpec,
    evaluate_estimator,
    make_pair_design,
    mmd_incomplete,
)
from .kernels import KernelConfig, MedianHeuristic, resolve_bandwidth
from .pipeline import RunConfig, derived_rng, run_feature_psi, sample_select
from .synthetic import SyntheticSpec, generate

CSV_COLUMNS = ("experiment", "estimator", "n", "trial", "metric", "value")

EXPERIMENTS = ("normality", "fpr_tpr", "type2", "pvalue_uniformity")


def _row(experiment, estimator, n, trial, metric, value) -> dict:
    return {
        "experiment": experiment,
        "estimator": estimator,
        "n": n,
        "trial": "" if trial is None else trial,
        "metric": metric,
        "value": value,
    }


def write_rows(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _two_sample_1d(n: int, delta: float, rng) -> tuple:
    x = rng.standard_normal((1, n))
    y = rng.standard_normal((1, n)) + delta
    return x, y


def _estimator_value(x, y, spec: EstimatorSpec, rng) -> float:
    cfg = KernelConfig(resolve_bandwidth(np.hstack((x, y)), MedianHeuristic(), rng))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evaluate_estimator(x, y, cfg, spec, rng=rng).value


def _studentized_statistic(x, y, spec: EstimatorSpec, rng) -> float:
    """Estimate divided by the square root of its own variance field.

    This is each estimator's natural asymptotic test statistic; the complete
    estimator carries no variance (degenerate null) and is used raw.
    """
    cfg = KernelConfig(resolve_bandwidth(np.hstack((x, y)), MedianHeuristic(), rng))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = evaluate_estimator(x, y, cfg, spec, rng=rng)
    if est.variance is None:
        return est.value
    return est.value / math.sqrt(max(est.variance, 1e-300))


def default_normality_estimators(n: int = 200) -> list:
    specs = [EstimatorSpec("complete")]
    specs += [
        EstimatorSpec("block", block_size=B) for B in (5, 20, 100) if B <= n // 2
    ]
    specs += [EstimatorSpec("incomplete", r=r) for r in (1.0, 10.0, 50.0, 100.0)]
    return specs


def simulate_normality(
    estimators: Optional[Sequence[EstimatorSpec]] = None,
    n: int = 200,
    trials: int = 2000,
    seed: int = 0,
    delta: float = 0.5,
    scenarios: Sequence[str] = ("null", "shift"),
) -> list:
    """Replicate distributions of each estimator under p = q and p != q.

    Emits the raw replicate values plus skewness, excess kurtosis, and a
    normality KS p-value (against a fitted normal) per cell.
    """
    if trials < 8:
        raise ConfigError("normality experiment needs at least 8 trials")
    rows = []
    for spec in estimators or default_normality_estimators(n):
        label = spec.label(n)
        for scenario in scenarios:
            shift = 0.0 if scenario == "null" else delta
            values = np.empty(trials)
            for t in range(trials):
                rng = derived_rng(seed, t, hash(scenario) % 1000)
                x, y = _two_sample_1d(n, shift, rng)
                values[t] = _estimator_value(x, y, spec, rng)
            cell = f"{label}|{scenario}"
            rows += [
                _row("normality", cell, n, t, "estimate", values[t])
                for t in range(trials)
            ]
            centered = (values - values.mean()) / values.std(ddof=1)
            ks = stats.kstest(centered, "norm")
            rows += [
                _row("normality", cell, n, None, "skewness", float(stats.skew(values))),
                _row(
                    "normality", cell, n, None,
                    "excess_kurtosis", float(stats.kurtosis(values)),
                ),
                _row("normality", cell, n, None, "ks_pvalue", float(ks.pvalue)),
            ]
    return rows


def default_psi_estimators() -> list:
    return [
        EstimatorSpec("incomplete", r=10.0),
        EstimatorSpec("block"),
        EstimatorSpec("linear"),
    ]


def simulate_fpr_tpr(
    kind: str = "mean_shift",
    n_grid: Sequence[int] = (500,),
    estimators: Optional[Sequence[EstimatorSpec]] = None,
    trials: int = 200,
    seed: int = 0,
    config: Optional[RunConfig] = None,
    d: int = 50,
    n_true: int = 10,
) -> list:
    """Average TPR/FPR of the full pipeline, with and without the PSI
    adjustment, per (sample size, estimator) cell."""
    base = config or RunConfig()
    rows = []
    for spec in estimators or default_psi_estimators():
        for n in n_grid:
            label = spec.label(n)
            cell = np.zeros((trials, 4))
            counts = np.zeros(4)
            for t in range(trials):
                trial_seed = int(derived_rng(seed, t).integers(2**31))
                sspec = SyntheticSpec(kind=kind, d=d, n_true=n_true, n=n, seed=trial_seed)
                X, Y, true_idx = generate(sspec)
                cfg = RunConfig(
                    estimator=spec,
                    k=base.k,
                    alpha=base.alpha,
                    cov_fraction=base.cov_fraction,
                    seed=trial_seed,
                    bandwidth=base.bandwidth,
                    alternative=base.alternative,
                )
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    outcome = run_feature_psi(X, Y, cfg)
                true_set = set(int(i) for i in true_idx)
                sel = [int(s) for s in outcome.state.selected]
                for j, results in enumerate((outcome.results_psi, outcome.results_naive)):
                    tpr = sum(
                        1 for res, s in zip(results, sel)
                        if s in true_set and res.significant
                    ) / max(1, len(true_set))
                    nulls = [res for res, s in zip(results, sel) if s not in true_set]
                    cell[t, 2 * j] = tpr
                    counts[2 * j] += 1
                    if nulls:
                        cell[t, 2 * j + 1] = np.mean([r.significant for r in nulls])
                        counts[2 * j + 1] += 1
                    else:
                        cell[t, 2 * j + 1] = np.nan
                rows += [
                    _row("fpr_tpr", label, n, t, "tpr_psi", cell[t, 0]),
                    _row("fpr_tpr", label, n, t, "fpr_psi", cell[t, 1]),
                    _row("fpr_tpr", label, n, t, "tpr_naive", cell[t, 2]),
                    _row("fpr_tpr", label, n, t, "fpr_naive", cell[t, 3]),
                ]
            means = np.nanmean(cell, axis=0)
            for metric, value in zip(
                ("tpr_psi", "fpr_psi", "tpr_naive", "fpr_naive"), means
            ):
                rows.append(_row("fpr_tpr", label, n, None, f"avg_{metric}", float(value)))
    return rows


def default_type2_estimators() -> list:
    return [
        EstimatorSpec("incomplete", r=10.0),
        EstimatorSpec("block"),
        EstimatorSpec("linear"),
        EstimatorSpec("complete"),
    ]


def simulate_type2(
    n_grid: Sequence[int] = (100, 400, 800),
    estimators: Optional[Sequence[EstimatorSpec]] = None,
    trials: int = 500,
    seed: int = 0,
    delta: float = 0.35,
) -> list:
    """Type II error of the plain two-sample test on 1-d mean-shift data.

    Each estimator tests with its studentized statistic (the estimate over
    the square root of its own variance field; the complete estimator, which
    carries no variance, is used raw). The rejection threshold per cell is
    the Monte-Carlo 95th percentile of that statistic under the null, fixing
    the Type I error at 0.05 without leaning on any normal approximation.
    """
    rows = []
    for spec in estimators or default_type2_estimators():
        for n in n_grid:
            label = spec.label(n)
            null_vals = np.empty(trials)
            alt_vals = np.empty(trials)
            for t in range(trials):
                rng = derived_rng(seed, t, 0)
                x, y = _two_sample_1d(n, 0.0, rng)
                null_vals[t] = _studentized_statistic(x, y, spec, rng)
                rng = derived_rng(seed, t, 1)
                x, y = _two_sample_1d(n, delta, rng)
                alt_vals[t] = _studentized_statistic(x, y, spec, rng)
            threshold = float(np.quantile(null_vals, 0.95))
            type2 = float(np.mean(alt_vals <= threshold))
            rows += [
                _row("type2", label, n, None, "threshold", threshold),
                _row("type2", label, n, None, "type2_error", type2),
                _row("type2", label, n, None, "delta", delta),
            ]
    return rows


def simulate_pvalue_uniformity(
    runs: int = 1000,
    seed: int = 0,
    n: int = 150,
    dim: int = 20,
    r: float = 5.0,
    n_decoys: int = 3,
    decoy_shift: float = 0.6,
    alternative: str = "two_sided",
) -> list:
    """Candidate-selection p-values for an oracle that truly matches the
    reference distribution, plus shifted decoys.

    Emits the winner's p-value per run and, over the runs the oracle wins, a
    KS uniformity p-value. The oracle sits at index 0.
    """
    rows = []
    oracle_ps = []
    wins = 0
    for t in range(runs):
        rng = derived_rng(seed, t)
        reference = SampleSet(rng.standard_normal((dim, n)))
        cands = [SampleSet(rng.standard_normal((dim, n)))]
        for j in range(n_decoys):
            shift = decoy_shift * (1.0 + 0.5 * j) / np.sqrt(dim)
            cands.append(SampleSet(rng.standard_normal((dim, n)) + shift))
        cfg = RunConfig(
            estimator=EstimatorSpec("incomplete", r=r),
            k=1,
            seed=int(rng.integers(2**31)),
            alternative=alternative,
        )
        report = sample_select(cands, reference, cfg)
        idx = report.summary["selected_index"]
        p = report.summary["p_value"]
        rows.append(_row("pvalue_uniformity", "incomplete_r%g" % r, n, t, "p_value", p))
        rows.append(_row("pvalue_uniformity", "incomplete_r%g" % r, n, t, "winner", idx))
        if idx == 0:
            wins += 1
            oracle_ps.append(p)
    ks = stats.kstest(np.asarray(oracle_ps), "uniform") if oracle_ps else None
    rows += [
        _row("pvalue_uniformity", "incomplete_r%g" % r, n, None, "oracle_wins", wins),
        _row(
            "pvalue_uniformity", "incomplete_r%g" % r, n, None,
            "oracle_ks_pvalue", float(ks.pvalue) if ks else float("nan"),
        ),
    ]
    return rows


def default_bench_estimators() -> list:
    return [
        EstimatorSpec("incomplete", r=0.5),
        EstimatorSpec("incomplete", r=10.0),
        EstimatorSpec("block"),
        EstimatorSpec("complete"),
    ]


def bench(
    n_grid: Sequence[int] = (2000, 4000, 8000, 14000, 20000),
    estimators: Optional[Sequence[EstimatorSpec]] = None,
    repetitions: int = 3,
    seed: int = 0,
) -> list:
    """Median wall-clock time per (estimator, n) cell on 1-d data.

    The clock covers design construction plus estimation; the kernel width
    is fixed so bandwidth resolution (common to all estimators) stays out
    of the comparison.
    """
    cfg = KernelConfig(1.0)
    rows = []

    def run_once(spec, x, y, rng):
        if spec.kind == "incomplete":
            design = make_pair_design(x.shape[1], "random", rng=rng, r=spec.r)
            mmd_incomplete(x, y, cfg, design)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                evaluate_estimator(x, y, cfg, spec, rng=rng)

    spin = np.linspace(0.0, 1.0, 200_000)

    def prime_cpu(duration=0.08):
        # busy-spin so frequency scaling does not bill short cells at a
        # lower clock than long ones
        t0 = time.perf_counter()
        while time.perf_counter() - t0 < duration:
            np.exp(spin)

    cells = [(spec, n) for spec in estimators or default_bench_estimators()
             for n in n_grid]
    loops = {}
    times = {}
    # repetitions are interleaved passes over all cells, so slow phases of a
    # shared machine inflate every cell about equally instead of one corner
    # of the grid
    for rep in range(repetitions):
        for spec, n in cells:
            key = (spec.label(n), n)
            rng = derived_rng(seed, n, rep)
            if key not in loops:
                x, y = _two_sample_1d(n, 0.0, rng)
                prime_cpu()
                t0 = time.perf_counter()
                run_once(spec, x, y, rng)  # warm-up, untimed
                warm = time.perf_counter() - t0
                # repeat short cells inside the clock to beat timer jitter
                loops[key] = max(1, min(400, int(0.15 / max(warm, 1e-9))))
                times[key] = []
            # fresh arrays per iteration keep cache behavior comparable
            # across sample sizes
            data = [_two_sample_1d(n, 0.0, rng) for _ in range(loops[key])]
            prime_cpu()
            t0 = time.perf_counter()
            for x, y in data:
                run_once(spec, x, y, rng)
            elapsed = (time.perf_counter() - t0) / loops[key]
            times[key].append(elapsed)
            rows.append(_row("bench", key[0], n, rep, "seconds", elapsed))
    for (label, n), values in times.items():
        rows.append(_row("bench", label, n, None, "median_seconds", float(np.median(values))))
        rows.append(_row("bench", label, n, None, "min_seconds", float(np.min(values))))
    return rows
