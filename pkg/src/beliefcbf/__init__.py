"""Risk-aware safety filters from sample-based beliefs.

Concentration lower bounds on tail risk measures, belief control barrier
functions composed over propagated belief samples, and a stochastic-CBF
quadratic program for safe control, with closed-loop scenario drivers and
a Monte Carlo benchmark harness.
"""

from .risk_bounds import (BoundResult, RiskMeasure, RiskSpec, empirical_var,
                          min_samples, risk_lower_bound, var_lower_bound,
                          cvar_lower_bound, expectation_lower_bound)
from .sde import ControlInput, ModelParams, ObjectState, RobotState
from .belief import BeliefState, GaussianMixture
from .barriers import BarrierEval, BcbfEval, collision_barrier, compose_bcbf, fov_barrier
from .qp import CbfConstraint, QpSpec, solve_qp
from .safety_filter import FilterConfig, filter_step
from .scenarios import (BenchmarkSummary, RunOutcome, RunStatus, ScenarioConfig,
                        benchmark, run_collision, run_tracking, shift_experiment)

__all__ = [
    "BoundResult", "RiskMeasure", "RiskSpec", "empirical_var", "min_samples",
    "risk_lower_bound", "var_lower_bound", "cvar_lower_bound",
    "expectation_lower_bound", "ControlInput", "ModelParams", "ObjectState",
    "RobotState", "BeliefState", "GaussianMixture", "BarrierEval", "BcbfEval",
    "collision_barrier", "compose_bcbf", "fov_barrier", "CbfConstraint",
    "QpSpec", "solve_qp", "FilterConfig", "filter_step", "BenchmarkSummary",
    "RunOutcome", "RunStatus", "ScenarioConfig", "benchmark", "run_collision",
    "run_tracking", "shift_experiment",
]

__version__ = "0.1.0"
