"""Sample-based belief over the moving object and its propagation.

The belief is a plain array of N object-position samples. It is initialized
by i.i.d. draws from a Gaussian mixture and then only diffuses: every
sample is advanced by the same single-integrator SDE with an independent
Brownian increment, and no measurement updates ever occur. Sample lineage
is preserved (row i stays row i), so per-sample weights computed by the
risk bounds map stably onto belief rows within a control step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class GaussianMixture:
    """Finite Gaussian mixture over 2-D object positions."""

    weights: np.ndarray
    means: np.ndarray        # (n_components, 2)
    covariances: np.ndarray  # (n_components, 2, 2)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)
        if self.weights.ndim != 1 or np.any(self.weights < 0):
            raise ValueError("mixture weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if self.means.shape != (self.weights.size, 2):
            raise ValueError("means must have shape (n_components, 2)")
        if self.covariances.shape != (self.weights.size, 2, 2):
            raise ValueError("covariances must have shape (n_components, 2, 2)")
        self._factors = [_psd_factor(c) for c in self.covariances]

    def component_factor(self, i: int) -> np.ndarray:
        """Matrix L with L @ L.T equal to covariance i."""
        return self._factors[i]


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if np.abs(cov - cov.T).max() > 1e-9:
        raise ValueError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # positive semidefinite (e.g. exactly zero) covariances are allowed
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-12:
            raise ValueError("covariance must be positive semidefinite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass
class BeliefState:
    """N object-position samples; the controller's only knowledge of the object."""

    samples: np.ndarray  # (N, 2)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[1] != 2:
            raise ValueError("samples must have shape (N, 2)")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("belief samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.shape[0]


def sample_initial_belief(mix: GaussianMixture, n: int,
                          rng: np.random.Generator) -> BeliefState:
    """Draw n i.i.d. samples: categorical component choice, then Gaussian."""
    if n < 1:
        raise ValueError("need at least one sample")
    comps = rng.choice(mix.weights.size, size=n, p=mix.weights)
    out = np.empty((n, 2))
    for i in range(mix.weights.size):
        mask = comps == i
        m = int(mask.sum())
        if m == 0:
            continue
        z = rng.standard_normal((m, 2))
        out[mask] = mix.means[i] + z @ mix.component_factor(i).T
    return BeliefState(out)


def propagate_belief(b: BeliefState, velocity, d_diag, dt: float,
                     rng: np.random.Generator) -> BeliefState:
    """Advance every sample by one Euler-Maruyama step with independent noise."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = np.asarray(velocity, dtype=float)
    d = np.asarray(d_diag, dtype=float)
    noise = rng.standard_normal(b.samples.shape)
    return BeliefState(b.samples + v * dt + d * math.sqrt(dt) * noise)


def draw_ground_truth(mix: GaussianMixture, rng: np.random.Generator) -> np.ndarray:
    """One draw from the mixture, used as the true (hidden) object state."""
    i = int(rng.choice(mix.weights.size, p=mix.weights))
    z = rng.standard_normal(2)
    return mix.means[i] + mix.component_factor(i) @ z
