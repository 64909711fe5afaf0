"""Command-line interface: bounds, validate, simulate, benchmark, shift.

Outputs are machine readable: JSON summaries and CSV traces, with report
figures (PNG) rendered alongside unless ``--no-figures`` is given. All
randomness flows from ``--seed``. Exit codes: 0 on completion (run
outcomes are data, not errors), 1 on bad input or configuration, 2 when a
sample file is too small for the requested bound.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ConfigError, load_scenario
from .risk_bounds import (InsufficientSamplesError, RiskMeasure, RiskSpec,
                          empirical_var, min_samples, risk_lower_bound)
from .scenarios import (RunStatus, TRACE_COLUMNS, benchmark, run_collision,
                        run_tracking, shift_experiment)

_GAUSS_MU, _GAUSS_SIGMA = 0.5, 0.2


def _risk_spec_from_args(args) -> RiskSpec:
    return RiskSpec(measure=RiskMeasure(args.measure), tau=args.tau,
                    delta=args.delta, ell=args.ell,
                    essential_lb=args.essential_lb)


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_bounds(args) -> int:
    try:
        text = Path(args.samples).read_text()
        values = [float(line) for line in text.split() if line.strip()]
        samples = np.array(values)
        if samples.size == 0 or not np.all(np.isfinite(samples)):
            raise ValueError("sample file must contain finite scalars")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        spec = _risk_spec_from_args(args)
        result = risk_lower_bound(samples, spec)
    except InsufficientSamplesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = {
        "measure": args.measure,
        "n": int(samples.size),
        "value": result.value,
        "k": result.k_index,
        "epsilon_eff": result.epsilon_eff,
        "b_coeff": result.b_coeff,
    }
    if args.weights:
        out["weights"] = result.weights.tolist()
    if args.figure:
        from .plots import bounds_figure
        markers = {f"{args.measure} lower bound": result.value}
        if 0.0 < args.tau < 1.0:
            markers["empirical VaR"] = empirical_var(samples, args.tau)
        bounds_figure(samples, markers, args.figure)
    _emit(out)
    return 0


def _gaussian_truth(measure: RiskMeasure, tau: float) -> float:
    if measure is RiskMeasure.VAR:
        return _GAUSS_MU + _GAUSS_SIGMA * stats.norm.ppf(tau)
    if measure is RiskMeasure.CVAR:
        z = stats.norm.ppf(tau)
        return _GAUSS_MU - _GAUSS_SIGMA * stats.norm.pdf(z) / tau
    return _GAUSS_MU


def cmd_validate(args) -> int:
    """Monte Carlo check of the probabilistic guarantee on a known Gaussian."""
    if args.trials < 1:
        print("error: trials must be >= 1", file=sys.stderr)
        return 1
    try:
        spec = _risk_spec_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    truth = _gaussian_truth(spec.measure, spec.tau)
    rng = np.random.default_rng(args.seed)
    draws = rng.normal(_GAUSS_MU, _GAUSS_SIGMA, size=(args.trials, args.n))
    violations = 0
    for row in draws:
        try:
            res = risk_lower_bound(row, spec)
        except InsufficientSamplesError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if res.value > truth:
            violations += 1
    rate = violations / args.trials
    threshold = spec.delta + 3.0 * np.sqrt(spec.delta * (1 - spec.delta) / args.trials)
    _emit({
        "measure": args.measure,
        "n": args.n,
        "trials": args.trials,
        "true_value": truth,
        "violation_rate": rate,
        "threshold": float(threshold),
        "passed": bool(rate <= threshold),
    })
    return 0


def _write_trace(path: Path, rows, stride: int):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_COLUMNS)
        for i, row in enumerate(rows):
            if i % stride == 0:
                w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])


def cmd_simulate(args) -> int:
    cfg, _ = load_scenario(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    collect = args.trace != "none"
    if cfg.kind == "collision":
        outcome, trace = run_collision(cfg, args.seed, collect_trace=collect)
        summary = {
            "kind": cfg.kind,
            "seed": args.seed,
            "status": outcome.status.value,
            "t_end": outcome.t_end,
            "violations": outcome.violations,
        }
        timing = {"t_avg_filter_ms": outcome.t_avg_filter_ms}
    else:
        result, trace = run_tracking(cfg, args.seed, collect_trace=collect)
        summary = {
            "kind": cfg.kind,
            "seed": args.seed,
            "steps": result.steps,
            "violations": result.violations,
            "min_bound": float(result.min_bounds.min()),
            "bound_positive_fraction": float((result.min_bounds > 0).mean()),
        }
        timing = {"t_avg_filter_ms": result.t_avg_filter_ms}
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out_dir / "timing.json").write_text(
        json.dumps(timing, indent=2, sort_keys=True) + "\n")
    if collect:
        _write_trace(out_dir / "trace.csv", trace,
                     stride=20 if args.trace == "summary" else 1)
    if not args.no_figures and trace:
        from .plots import trace_figure
        trace_figure(trace, cfg, out_dir / "trace.png")
    _emit(summary)
    return 0


def _summary_payload(summary, n_samples: int):
    return {
        "n_runs": summary.n_runs,
        "n_samples": n_samples,
        "methods": [
            {"method": m.label, "success": m.success, "collision": m.collision,
             "timeout": m.timeout, "t_avg_ms": m.t_avg_ms}
            for m in summary.methods
        ],
    }


def _write_benchmark_outputs(summary, cfg, out_dir: Path, stem: str,
                             figures: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _summary_payload(
        summary, summary.config.get("n_samples", cfg.n_samples))
    (out_dir / f"{stem}.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with open(out_dir / f"{stem}.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "success", "collision", "timeout", "t_avg_ms"])
        for m in summary.methods:
            w.writerow([m.label, m.success, m.collision, m.timeout,
                        f"{m.t_avg_ms:.3f}"])
    if figures:
        from .plots import benchmark_figure
        benchmark_figure(summary, out_dir / f"{stem}.png")
    _emit(payload)


_DEFAULT_METHODS = [
    RiskSpec(measure=RiskMeasure.VAR, tau=0.1, delta=0.05),
    RiskSpec(measure=RiskMeasure.CVAR, tau=0.1, delta=0.05),
    RiskSpec(measure=RiskMeasure.EXPECTATION, delta=0.05),
]


def cmd_benchmark(args) -> int:
    cfg, opts = load_scenario(args.config)
    methods = opts["methods"] or _DEFAULT_METHODS
    summary = benchmark(cfg, opts["n_runs"], methods, base_seed=args.seed,
                        workers=args.workers)
    _write_benchmark_outputs(summary, cfg, Path(args.out_dir), "benchmark",
                             not args.no_figures)
    return 0


def cmd_shift(args) -> int:
    cfg, opts = load_scenario(args.config)
    summary = shift_experiment(cfg, opts["n_runs"], ell=opts["shift_ell"],
                               velocity_scale=opts["shift_velocity_scale"],
                               base_seed=args.seed, workers=args.workers)
    _write_benchmark_outputs(summary, cfg, Path(args.out_dir), "shift",
                             not args.no_figures)
    return 0


def _add_risk_flags(p, require_measure=True):
    p.add_argument("--measure", choices=[m.value for m in RiskMeasure],
                   required=require_measure)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--ell", type=float, default=0.0)
    p.add_argument("--essential-lb", type=float, default=-1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefcbf",
        description="Risk-aware safety filters from sample-based beliefs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="risk lower bound of a sample file")
    p.add_argument("samples", help="newline-delimited scalar sample file")
    _add_risk_flags(p)
    p.add_argument("--weights", action="store_true",
                   help="include the per-sample weight vector")
    p.add_argument("--figure", help="render a histogram figure to this path")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("validate",
                       help="Monte Carlo check of the bound guarantee")
    _add_risk_flags(p)
    p.add_argument("--n", type=int, default=200, help="samples per trial")
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    for name, fn in (("simulate", cmd_simulate),):
        p = sub.add_parser(name, help="run one closed-loop scenario")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--trace", choices=["none", "summary", "full"],
                       default="summary")
        p.add_argument("--no-figures", action="store_true")
        p.set_defaults(func=fn)

    for name, fn in (("benchmark", cmd_benchmark), ("shift", cmd_shift)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--no-figures", action="store_true")
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
