"""Sample-based concentration lower bounds on tail risk measures.

Order-statistic lower bounds on VaR, CVaR and the expectation of a scalar
random variable from i.i.d. samples, plus variants that stay valid under a
one-sided Kolmogorov-Smirnov shift of at most ``ell`` between the sampled
and the true distribution.

Conventions used throughout:

* Samples are ranked in DESCENDING order: ``eta^1`` is the largest sample,
  ``eta^N`` the smallest, so the CVaR tail sum over indices ``k+1..N`` runs
  over the lowest samples. Ties are broken by ascending original index.
* Every bound is affine in the samples with non-negative, locally constant
  weights. The weight vector (over original sample indices) plus the
  coefficient on the essential lower bound is returned alongside the value,
  so callers can propagate derivatives through the bound.
* The CVaR bound needs a finite essential lower bound ``b`` with
  ``Pr[Y >= b] = 1``; the VaR bound does not use it.

All functions here are pure and safe to call from multiple threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import special


class RiskMeasure(Enum):
    VAR = "var"
    CVAR = "cvar"
    EXPECTATION = "expectation"


class InsufficientSamplesError(ValueError):
    """Raised when the sample count is below the minimum for the bound."""


class EssentialBoundError(ValueError):
    """Raised when a sample falls below the declared essential lower bound."""


@dataclass(frozen=True)
class RiskSpec:
    """Choice of risk measure plus its level, confidence and shift budget.

    ``tau`` is the risk level (lower-tail quantile level), ``delta`` the
    allowed probability that the bound exceeds the true risk measure,
    ``ell`` the one-sided KS shift budget, and ``essential_lb`` a finite
    value the bounded quantity never falls below (used by CVaR/expectation
    only).

    ``robust_slack_sign`` controls how ``ell`` enters the CVaR slack:
    ``+1`` (default) enlarges the slack so the robust bound is never above
    the nominal one; ``-1`` shrinks it instead.
    """

    measure: RiskMeasure
    tau: float = 0.1
    delta: float = 0.05
    ell: float = 0.0
    essential_lb: float = 0.0
    robust_slack_sign: float = 1.0

    def __post_init__(self):
        if self.measure is RiskMeasure.EXPECTATION:
            object.__setattr__(self, "tau", 1.0)
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.measure is RiskMeasure.VAR:
            if not self.tau < 1.0:
                raise ValueError("VaR requires tau in (0, 1)")
            if not 0.0 < self.delta < 1.0:
                raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        else:
            if not 0.0 < self.delta <= 0.5:
                raise ValueError(
                    f"CVaR/expectation require delta in (0, 0.5], got {self.delta}"
                )
        if not 0.0 <= self.ell < self.tau:
            raise ValueError(f"ell must be in [0, tau), got {self.ell}")
        if not math.isfinite(self.essential_lb):
            raise ValueError("essential_lb must be finite")
        if self.robust_slack_sign not in (-1.0, 1.0):
            raise ValueError("robust_slack_sign must be +1 or -1")


@dataclass(frozen=True)
class OrderedSamples:
    """Samples sorted in descending order with the sorting permutation.

    ``values[i]`` is the (i+1)-th largest sample; ``perm[i]`` is its index
    in the original array. Ties keep ascending original index.
    """

    values: np.ndarray
    perm: np.ndarray


def order_descending(samples: np.ndarray) -> OrderedSamples:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("samples must be a non-empty 1-D array")
    # stable sort on -values keeps ascending original index among ties
    perm = np.argsort(-arr, kind="stable")
    return OrderedSamples(values=arr[perm], perm=perm)


@dataclass(frozen=True)
class BoundResult:
    """A risk lower bound together with its affine decomposition.

    ``value == weights @ samples + b_coeff * essential_lb`` up to rounding.
    ``k_index`` is the selected descending order-statistic index (0 in the
    degenerate CVaR case where the bound collapses to the essential lower
    bound). ``epsilon_eff`` is the effective DKW slack (0 for VaR).
    """

    value: float
    weights: np.ndarray
    b_coeff: float
    k_index: int
    epsilon_eff: float

    @property
    def active_indices(self) -> np.ndarray:
        """Original sample indices carrying nonzero weight."""
        return np.nonzero(self.weights)[0]


def binomial_cdf(k: int, n: int, p: float) -> float:
    """P[X <= k] for X ~ Binomial(n, p), via the regularized incomplete beta."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return float(special.bdtr(int(k), int(n), p))


def min_samples(spec: RiskSpec) -> int:
    """Smallest sample count for which the bound of `spec` is defined.

    For VaR the requirement is evaluated at the shifted level ``tau - ell``
    (the robust bound is the nominal bound at that level).
    """
    if spec.measure is RiskMeasure.VAR:
        tau_eff = spec.tau - spec.ell
        return math.ceil(math.log(spec.delta) / math.log(1.0 - tau_eff))
    if spec.measure is RiskMeasure.CVAR:
        return math.ceil(-0.5 * math.log(spec.delta) / spec.tau**2)
    return math.ceil(-0.5 * math.log(spec.delta))


@lru_cache(maxsize=4096)
def var_k_index(n: int, tau_eff: float, delta: float) -> int:
    """Smallest k in 1..n with Bin(k-1; n, 1-tau_eff) >= 1-delta.

    The CDF is nondecreasing in k, so a binary search is exact.
    """
    target = 1.0 - delta
    p = 1.0 - tau_eff
    if binomial_cdf(n - 1, n, p) < target:
        raise InsufficientSamplesError(
            f"no valid order-statistic index for N={n}, tau={tau_eff}, delta={delta}"
        )
    lo, hi = 1, n  # invariant: hi satisfies the condition
    while lo < hi:
        mid = (lo + hi) // 2
        if binomial_cdf(mid - 1, n, p) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def var_lower_bound(samples: np.ndarray, spec: RiskSpec) -> BoundResult:
    """Lower bound on VaR_tau, robust to an `ell` one-sided KS shift.

    The bound is the k-th largest sample at effective level ``tau - ell``,
    with k chosen from the binomial CDF so that the bound underestimates
    the true VaR with probability at least ``1 - delta``.
    """
    ordered = order_descending(samples)
    n = ordered.values.size
    tau_eff = spec.tau - spec.ell
    n_min = math.ceil(math.log(spec.delta) / math.log(1.0 - tau_eff))
    if n < n_min:
        raise InsufficientSamplesError(
            f"VaR bound at tau={spec.tau}, ell={spec.ell}, delta={spec.delta} "
            f"requires N >= {n_min}, got {n}"
        )
    k = var_k_index(n, tau_eff, spec.delta)
    weights = np.zeros(n)
    weights[ordered.perm[k - 1]] = 1.0
    return BoundResult(
        value=float(ordered.values[k - 1]),
        weights=weights,
        b_coeff=0.0,
        k_index=k,
        epsilon_eff=0.0,
    )


def _cvar_bound(samples: np.ndarray, tau: float, delta: float, ell: float,
                b: float, slack_sign: float, n_min: int) -> BoundResult:
    ordered = order_descending(samples)
    n = ordered.values.size
    if n < n_min:
        raise InsufficientSamplesError(
            f"CVaR bound at tau={tau}, delta={delta} requires N >= {n_min}, got {n}"
        )
    if ordered.values[-1] < b:
        raise EssentialBoundError(
            f"sample {ordered.values[-1]} below essential lower bound {b}"
        )
    eps = math.sqrt(-math.log(delta) / (2.0 * n))
    eps_eff = max(eps + slack_sign * ell, 0.0)
    if tau - eps_eff <= 0.0:
        # slack saturates the whole integral at the essential lower bound
        return BoundResult(value=b, weights=np.zeros(n), b_coeff=1.0,
                           k_index=0, epsilon_eff=eps_eff)
    # smallest k with k/n - eps_eff - 1 + tau >= 0
    k = max(1, min(n, math.ceil(n * (1.0 - tau + eps_eff) - 1e-12)))
    while k / n - eps_eff - 1.0 + tau < 0.0:
        k += 1
    c_k = (k / n - eps_eff - 1.0 + tau) / tau
    tail = ordered.values[k:]
    value = (eps_eff * b + (k / n - eps_eff - 1.0 + tau) * ordered.values[k - 1]
             + tail.sum() / n) / tau
    weights = np.zeros(n)
    weights[ordered.perm[k - 1]] += c_k
    weights[ordered.perm[k:]] += 1.0 / (n * tau)
    return BoundResult(value=float(value), weights=weights, b_coeff=eps_eff / tau,
                       k_index=k, epsilon_eff=eps_eff)


def cvar_lower_bound(samples: np.ndarray, spec: RiskSpec) -> BoundResult:
    """Lower bound on CVaR_tau via a one-sided DKW band on the empirical CDF.

    With slack ``eps = sqrt(-ln(delta) / 2N)`` (enlarged by ``ell`` for the
    robust variant), the bound averages the lowest samples and charges the
    slack mass to the essential lower bound.
    """
    n_min = math.ceil(-0.5 * math.log(spec.delta) / spec.tau**2)
    return _cvar_bound(samples, spec.tau, spec.delta, spec.ell,
                       spec.essential_lb, spec.robust_slack_sign, n_min)


def expectation_lower_bound(samples: np.ndarray, spec: RiskSpec) -> BoundResult:
    """Lower bound on E[Y]: the CVaR bound at tau = 1."""
    n_min = math.ceil(-0.5 * math.log(spec.delta))
    return _cvar_bound(samples, 1.0, spec.delta, spec.ell,
                       spec.essential_lb, spec.robust_slack_sign, n_min)


def risk_lower_bound(samples: np.ndarray, spec: RiskSpec) -> BoundResult:
    """Dispatch to the bound selected by ``spec.measure``."""
    if spec.measure is RiskMeasure.VAR:
        return var_lower_bound(samples, spec)
    if spec.measure is RiskMeasure.CVAR:
        return cvar_lower_bound(samples, spec)
    return expectation_lower_bound(samples, spec)


def empirical_var(samples: np.ndarray, tau: float) -> float:
    """Empirical lower tau-quantile from the sample CDF.

    With ascending order statistics, returns the j-th smallest sample where
    ``j = max(1, floor(N * tau))``.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("samples must be non-empty")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    j = max(1, int(math.floor(arr.size * tau + 1e-12)))
    return float(np.partition(arr, j - 1)[j - 1])
