"""Command-line front end.

Four subcommands: ``feature-psi`` (two-sample feature selection with
selection-adjusted p-values), ``sample-select`` (pick and test the candidate
set closest to a reference), ``simulate`` (Monte-Carlo calibration suites),
and ``bench`` (estimator timing). Every run writes ``report.json`` and
``results.csv`` into ``--output-dir``; identical inputs, config, and seed
reproduce them byte for byte apart from the provenance timestamps.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, experiments
from .data import load_samples
from .errors import ConfigError, DataError, MmdPsiError, NumericalError
from .estimators import ESTIMATOR_KINDS, EstimatorSpec
from .kernels import FixedBandwidth, MedianHeuristic
from .pipeline import RunConfig, _jsonable, feature_psi, sample_select

DEFAULTS = {
    "estimator": "incomplete",
    "r": 10.0,
    "block_size": None,
    "k": 30,
    "alpha": 0.05,
    "cov_fraction": 1.0 / 3.0,
    "seed": 0,
    "bandwidth": "median",
    "alternative": "two_sided",
    "naive": False,
    "output_dir": ".",
    "trials": 200,
    "layout": "rows_are_samples",
    "label_column": None,
    "config": None,
    "true_features": None,
    "reference": None,
    "n_grid": None,
    "kind": "mean_shift",
    "delta": None,
    "d": 50,
    "n_true": 10,
    "n": 200,
    "repetitions": 3,
}

_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _BOOL_TRUE:
        return True
    if low in _BOOL_FALSE:
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}")


CONVERTERS = {
    "r": float,
    "block_size": int,
    "k": int,
    "alpha": float,
    "cov_fraction": float,
    "seed": int,
    "naive": _parse_bool,
    "trials": int,
    "n_grid": _parse_int_list,
    "delta": float,
    "d": int,
    "n_true": int,
    "n": int,
    "repetitions": int,
    "true_features": _parse_int_list,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--estimator", choices=ESTIMATOR_KINDS, default=S)
    parser.add_argument("--r", type=float, default=S)
    parser.add_argument("--block-size", dest="block_size", type=int, default=S)
    parser.add_argument("--k", type=int, default=S)
    parser.add_argument("--alpha", type=float, default=S)
    parser.add_argument("--cov-fraction", dest="cov_fraction", type=float, default=S)
    parser.add_argument("--seed", type=int, default=S)
    parser.add_argument("--bandwidth", default=S, help="'median' or a fixed width")
    parser.add_argument(
        "--alternative", choices=("two_sided", "greater"), default=S
    )
    parser.add_argument("--naive", action="store_true", default=S)
    parser.add_argument("--output-dir", dest="output_dir", default=S)
    parser.add_argument("--trials", type=int, default=S)
    parser.add_argument(
        "--layout",
        choices=("rows_are_samples", "labeled_single_file"),
        default=S,
    )
    parser.add_argument("--label-column", dest="label_column", default=S)
    parser.add_argument("--config", default=S, help="key=value file; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmdpsi",
        description="Kernel two-sample divergence with post-selection inference",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("feature-psi", help="select and test discriminative features")
    p.add_argument("x_file")
    p.add_argument("y_file", nargs="?", default=None)
    p.add_argument(
        "--true-features", dest="true_features", default=argparse.SUPPRESS,
        help="comma-separated ground-truth indices, enables TPR/FPR",
    )
    _add_common(p)

    p = sub.add_parser("sample-select", help="pick the candidate closest to a reference")
    p.add_argument("candidate_files", nargs="+")
    p.add_argument("--reference", required=True)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo calibration experiments")
    p.add_argument("experiment", choices=experiments.EXPERIMENTS)
    p.add_argument("--n-grid", dest="n_grid", default=argparse.SUPPRESS)
    p.add_argument("--kind", choices=("mean_shift", "variance_shift", "null"),
                   default=argparse.SUPPRESS)
    p.add_argument("--delta", type=float, default=argparse.SUPPRESS)
    p.add_argument("--d", type=int, default=argparse.SUPPRESS)
    p.add_argument("--n-true", dest="n_true", type=int, default=argparse.SUPPRESS)
    p.add_argument("--n", type=int, default=argparse.SUPPRESS)
    _add_common(p)

    p = sub.add_parser("bench", help="estimator timing table")
    p.add_argument("--n-grid", dest="n_grid", default=argparse.SUPPRESS)
    p.add_argument("--repetitions", type=int, default=argparse.SUPPRESS)
    _add_common(p)
    return parser


def _load_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = value.strip()
    return values


def _settings(ns: argparse.Namespace) -> dict:
    given = vars(ns)
    merged = dict(DEFAULTS)
    config_path = given.get("config")
    if config_path:
        for key, raw in _load_config_file(config_path).items():
            conv = CONVERTERS.get(key, str)
            merged[key] = conv(raw)
    for key, value in given.items():
        if key in ("command", "x_file", "y_file", "candidate_files",
                   "reference", "experiment"):
            continue
        if isinstance(value, str) and key in CONVERTERS and key != "bandwidth":
            value = CONVERTERS[key](value)
        merged[key] = value
    return merged


def _bandwidth_rule(text):
    if isinstance(text, (int, float)):
        return FixedBandwidth(float(text))
    if text == "median":
        return MedianHeuristic()
    try:
        return FixedBandwidth(float(text))
    except ValueError:
        raise ConfigError(
            f"--bandwidth expects 'median' or a positive number, got {text!r}"
        ) from None


def _run_config(opts: dict) -> RunConfig:
    spec = EstimatorSpec(
        kind=opts["estimator"],
        r=opts["r"],
        block_size=opts["block_size"],
    )
    return RunConfig(
        estimator=spec,
        k=opts["k"],
        alpha=opts["alpha"],
        cov_fraction=opts["cov_fraction"],
        seed=opts["seed"],
        bandwidth=_bandwidth_rule(opts["bandwidth"]),
        alternative=opts["alternative"],
        naive_mode=bool(opts["naive"]),
    )


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(
        json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _report_rows(report, command, n) -> list:
    rows = []
    label = report.provenance["config"]["estimator"]["kind"]
    for rec in report.records:
        for metric in ("score", "rank", "p_value", "pivot", "significant"):
            value = getattr(rec, metric)
            if value is None:
                continue
            rows.append({
                "experiment": command,
                "estimator": label,
                "n": n,
                "trial": rec.index,
                "metric": metric,
                "value": float(value) if not isinstance(value, bool) else int(value),
            })
    return rows


def _load_two_sets(opts, x_file, y_file):
    if opts["layout"] == "labeled_single_file":
        if y_file is not None:
            raise ConfigError(
                "labeled_single_file layout takes a single input file"
            )
        return load_samples(x_file, "labeled_single_file", opts["label_column"])
    if y_file is None:
        raise ConfigError("rows_are_samples layout needs both x_file and y_file")
    X = load_samples(x_file)
    Y = load_samples(y_file)
    return X, Y


def cmd_feature_psi(ns: argparse.Namespace, opts: dict) -> None:
    X, Y = _load_two_sets(opts, ns.x_file, ns.y_file)
    config = _run_config(opts)
    report = feature_psi(X, Y, config, true_features=opts.get("true_features"))
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report.payload(), out / "report.json")
    experiments.write_rows(
        _report_rows(report, "feature_psi", report.summary["n_inference_samples"]),
        out / "results.csv",
    )
    print(
        f"feature-psi: {report.summary['n_significant']} of "
        f"{len(report.summary['selected'])} selected features significant "
        f"at alpha={config.alpha}"
    )


def cmd_sample_select(ns: argparse.Namespace, opts: dict) -> None:
    reference = load_samples(ns.reference)
    candidates = [load_samples(path) for path in ns.candidate_files]
    names = [Path(path).stem for path in ns.candidate_files]
    config = _run_config(opts)
    report = sample_select(candidates, reference, config, candidate_names=names)
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report.payload(), out / "report.json")
    experiments.write_rows(
        _report_rows(report, "sample_select", report.summary["n_inference_samples"]),
        out / "results.csv",
    )
    tie = " (near tie)" if report.summary["near_tie"] else ""
    print(
        f"sample-select: picked {report.summary['selected']!r} "
        f"p={report.summary['p_value']:.4g}{tie}"
    )


def cmd_simulate(ns: argparse.Namespace, opts: dict) -> None:
    experiment = ns.experiment
    seed = opts["seed"]
    trials = opts["trials"]
    if experiment == "normality":
        rows = experiments.simulate_normality(
            n=opts["n"], trials=trials, seed=seed,
            delta=0.5 if opts["delta"] is None else opts["delta"],
        )
    elif experiment == "fpr_tpr":
        base = _run_config(opts)
        rows = experiments.simulate_fpr_tpr(
            kind=opts["kind"],
            n_grid=opts["n_grid"] or (500,),
            trials=trials,
            seed=seed,
            config=base,
            d=opts["d"],
            n_true=opts["n_true"],
        )
    elif experiment == "type2":
        rows = experiments.simulate_type2(
            n_grid=opts["n_grid"] or (100, 400, 800),
            trials=trials,
            seed=seed,
            delta=0.35 if opts["delta"] is None else opts["delta"],
        )
    else:
        rows = experiments.simulate_pvalue_uniformity(
            runs=trials, seed=seed, n=opts["n"],
            alternative=opts["alternative"],
        )
    _write_experiment(rows, experiment, opts)


def cmd_bench(ns: argparse.Namespace, opts: dict) -> None:
    rows = experiments.bench(
        n_grid=opts["n_grid"] or (2000, 4000, 8000, 14000, 20000),
        repetitions=opts["repetitions"],
        seed=opts["seed"],
    )
    _write_experiment(rows, "bench", opts)


def _write_experiment(rows: list, experiment: str, opts: dict) -> None:
    out = Path(opts["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    experiments.write_rows(rows, out / "results.csv")
    aggregates = [r for r in rows if r["trial"] == ""]
    payload = {
        "schema": "mmdpsi-report-1",
        "command": experiment,
        "records": [],
        "summary": {"aggregates": aggregates, "n_rows": len(rows)},
        "provenance": {
            "config": {k: v for k, v in sorted(opts.items()) if k != "config"},
            "version": __version__,
            "created_at": datetime.now(timezone.utc).isoformat(),
        },
    }
    _write_json(payload, out / "report.json")
    print(f"{experiment}: wrote {len(rows)} rows to {out / 'results.csv'}")


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        opts = _settings(ns)
        if ns.command == "feature-psi":
            cmd_feature_psi(ns, opts)
        elif ns.command == "sample-select":
            cmd_sample_select(ns, opts)
        elif ns.command == "simulate":
            cmd_simulate(ns, opts)
        elif ns.command == "bench":
            cmd_bench(ns, opts)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except MmdPsiError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
