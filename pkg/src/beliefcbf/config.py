"""JSON configuration ingestion with strict schema validation.

A single JSON file describes one scenario: model geometry and diffusions,
the object velocity estimate, the initial belief mixture, the risk spec,
filter gains, reference-controller gains, run timing, and benchmark
randomization. Unknown keys anywhere in the file are rejected so typos
fail loudly. Example configs live in ``configs/``.
"""
from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .belief import GaussianMixture
from .risk_bounds import RiskMeasure, RiskSpec
from .safety_filter import FilterConfig
from .scenarios import ScenarioConfig
from .sde import ModelParams


class ConfigError(ValueError):
    """Invalid or malformed configuration file."""


_SECTIONS = {
    "kind", "model", "object", "belief", "risk", "filter", "controller",
    "run", "benchmark",
}
_MODEL_KEYS = {"sigma_diag", "d_diag", "r_e", "r_o", "s_e", "beta_deg",
               "workspace_radius"}
_OBJECT_KEYS = {"velocity", "true_velocity_scale"}
_BELIEF_KEYS = {"n_samples", "mixture"}
_MIXTURE_KEYS = {"weights", "means", "covariances"}
_RISK_KEYS = {"measure", "tau", "delta", "ell", "robust_slack_sign"}
_FILTER_KEYS = {"gamma", "q_diag", "u_min", "u_max", "h_min"}
_CONTROLLER_KEYS = {"k_rho", "k_alpha"}
_RUN_KEYS = {"dt", "max_time", "horizon", "success_tolerance", "start", "target"}
_BENCHMARK_KEYS = {"n_runs", "start_jitter", "theta_jitter", "mean_jitter",
                   "methods", "shift_ell", "shift_velocity_scale"}


def _check_keys(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"section {where!r} must be an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")


def _risk_spec(d: dict, where: str = "risk") -> RiskSpec:
    _check_keys(d, _RISK_KEYS, where)
    try:
        measure = RiskMeasure(d.get("measure", "var"))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    try:
        return RiskSpec(measure=measure,
                        tau=float(d.get("tau", 0.1)),
                        delta=float(d.get("delta", 0.05)),
                        ell=float(d.get("ell", 0.0)),
                        robust_slack_sign=float(d.get("robust_slack_sign", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def build_scenario(raw: dict) -> tuple[ScenarioConfig, dict]:
    """Validate a raw config dict into a `ScenarioConfig` plus benchmark options."""
    _check_keys(raw, _SECTIONS, "<root>")
    kind = raw.get("kind")
    if kind not in ("tracking", "collision"):
        raise ConfigError(f"kind must be 'tracking' or 'collision', got {kind!r}")

    m = dict(raw.get("model", {}))
    _check_keys(m, _MODEL_KEYS, "model")
    try:
        params = ModelParams(
            sigma_diag=np.asarray(m.get("sigma_diag", [0.03, 0.03, 0.01]), float),
            d_diag=np.asarray(m.get("d_diag", [0.1, 0.1]), float),
            r_e=float(m.get("r_e", 0.15)),
            r_o=float(m.get("r_o", 0.1)),
            s_e=float(m.get("s_e", 0.05)),
            beta=math.radians(float(m.get("beta_deg", 40.0))),
            workspace_radius=float(m.get("workspace_radius", 20.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None

    obj = dict(raw.get("object", {}))
    _check_keys(obj, _OBJECT_KEYS, "object")
    v_est = np.asarray(obj.get("velocity", [0.75, -0.75]), float)
    true_scale = float(obj.get("true_velocity_scale", 1.0))

    bel = dict(raw.get("belief", {}))
    _check_keys(bel, _BELIEF_KEYS, "belief")
    if "mixture" not in bel:
        raise ConfigError("belief.mixture is required")
    mix = dict(bel["mixture"])
    _check_keys(mix, _MIXTURE_KEYS, "belief.mixture")
    try:
        mixture = GaussianMixture(np.asarray(mix["weights"], float),
                                  np.asarray(mix["means"], float),
                                  np.asarray(mix["covariances"], float))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"belief.mixture: {exc}") from None
    n_samples = int(bel.get("n_samples", 200))

    risk = _risk_spec(dict(raw.get("risk", {})))

    f = dict(raw.get("filter", {}))
    _check_keys(f, _FILTER_KEYS, "filter")
    ctrl = dict(raw.get("controller", {}))
    _check_keys(ctrl, _CONTROLLER_KEYS, "controller")
    try:
        fcfg = FilterConfig(
            risk=risk,
            gamma=float(f.get("gamma", 1.0)),
            Q=np.diag(np.asarray(f.get("q_diag", [1.0, 1.0]), float)),
            u_lo=np.asarray(f.get("u_min", [-2.0, -2.0]), float),
            u_hi=np.asarray(f.get("u_max", [2.0, 2.0]), float),
            h_min=float(f.get("h_min", 1e-6)),
            k_rho=float(ctrl.get("k_rho", 1.0)),
            k_alpha=float(ctrl.get("k_alpha", 2.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"filter: {exc}") from None

    run = dict(raw.get("run", {}))
    _check_keys(run, _RUN_KEYS, "run")
    bm = dict(raw.get("benchmark", {}))
    _check_keys(bm, _BENCHMARK_KEYS, "benchmark")
    methods = [_risk_spec(dict(d), f"benchmark.methods[{i}]")
               for i, d in enumerate(bm.get("methods", []))]
    bench_opts = {
        "n_runs": int(bm.get("n_runs", 100)),
        "methods": methods,
        "shift_ell": float(bm.get("shift_ell", 0.09)),
        "shift_velocity_scale": float(bm.get("shift_velocity_scale", 1.2)),
    }

    try:
        scenario = ScenarioConfig(
            kind=kind,
            params=params,
            mixture=mixture,
            n_samples=n_samples,
            filter=fcfg,
            target=np.asarray(run.get("target", [3.0, 3.0]), float),
            v_est=v_est,
            start=np.asarray(run.get("start", [0.0, 0.0, 0.0]), float),
            true_velocity_scale=true_scale,
            dt=float(run.get("dt", 0.005)),
            max_time=float(run.get("max_time", 10.0)),
            horizon=float(run.get("horizon", 8.0)),
            success_tolerance=float(run.get("success_tolerance", 0.1)),
            start_jitter=float(bm.get("start_jitter", 0.5)),
            theta_jitter=float(bm.get("theta_jitter", 0.3)),
            mean_jitter=float(bm.get("mean_jitter", 0.3)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return scenario, bench_opts


def load_scenario(path) -> tuple[ScenarioConfig, dict]:
    return build_scenario(load_config(path))
