"""Tiny dense quadratic program solver for the two-input safety filter.

Minimizes ``(u - u_ref)^T Q (u - u_ref)`` over a box with a handful of
linear inequality constraints ``a . u >= rhs``. With two inputs and at most
two barrier constraints the optimal active set can be found by exhaustive
enumeration of equality-constrained subproblems, which is exact and fast.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linprog, nnls

_FEAS_TOL = 1e-9


class QpInfeasibleError(RuntimeError):
    """No point in the box satisfies all barrier constraints."""


@dataclass
class CbfConstraint:
    """One linear-in-u safety constraint: feasibility is lin_u . u >= rhs."""

    lin_u: np.ndarray
    rhs: float

    def __post_init__(self):
        self.lin_u = np.asarray(self.lin_u, dtype=float)
        if not (np.all(np.isfinite(self.lin_u)) and np.isfinite(self.rhs)):
            raise ValueError("constraint coefficients must be finite")


@dataclass
class QpSpec:
    Q: np.ndarray
    u_ref: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.u_ref = np.asarray(self.u_ref, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise ValueError("box must satisfy lo <= hi")
        if self.Q.shape == (2, 2):
            spd = (self.Q[0, 0] > 0
                   and self.Q[0, 0] * self.Q[1, 1] - self.Q[0, 1] * self.Q[1, 0] > 0
                   and self.Q[0, 1] == self.Q[1, 0])
        else:
            spd = np.allclose(self.Q, self.Q.T) and np.all(np.linalg.eigvalsh(self.Q) > 0)
        if not spd:
            raise ValueError("Q must be symmetric positive definite")

    def rows(self):
        """All inequality constraints as (G, g) with feasibility G u >= g."""
        m = self.u_ref.size
        G = [c.lin_u for c in self.constraints]
        g = [c.rhs for c in self.constraints]
        eye = np.eye(m)
        for j in range(m):
            G.append(eye[j])
            g.append(self.lo[j])
            G.append(-eye[j])
            g.append(-self.hi[j])
        return np.array(G), np.array(g)


def _solve_qp_2d(spec: QpSpec) -> np.ndarray:
    """Scalar active-set enumeration specialized to two inputs."""
    q11 = float(spec.Q[0, 0])
    q12 = float(spec.Q[0, 1])
    q22 = float(spec.Q[1, 1])
    r1 = float(spec.u_ref[0])
    r2 = float(spec.u_ref[1])
    lo1, lo2 = float(spec.lo[0]), float(spec.lo[1])
    hi1, hi2 = float(spec.hi[0]), float(spec.hi[1])
    rows = [(float(c.lin_u[0]), float(c.lin_u[1]), float(c.rhs))
            for c in spec.constraints]
    rows += [(1.0, 0.0, lo1), (-1.0, 0.0, -hi1),
             (0.0, 1.0, lo2), (0.0, -1.0, -hi2)]

    def feasible(u1, u2):
        for a1, a2, b in rows:
            if a1 * u1 + a2 * u2 < b - _FEAS_TOL:
                return False
        return True

    # fast path: with diagonal Q the box projection of u_ref is the
    # box-constrained optimum; accept it when it meets every constraint
    if q12 == 0.0:
        u1 = min(max(r1, lo1), hi1)
        u2 = min(max(r2, lo2), hi2)
        if feasible(u1, u2):
            return np.array([u1, u2])

    det = q11 * q22 - q12 * q12
    best = None
    best_obj = np.inf

    def consider(u1, u2):
        nonlocal best, best_obj
        if feasible(u1, u2):
            d1, d2 = u1 - r1, u2 - r2
            obj = q11 * d1 * d1 + 2.0 * q12 * d1 * d2 + q22 * d2 * d2
            if obj < best_obj - 1e-15:
                best_obj, best = obj, (u1, u2)

    consider(r1, r2)
    n = len(rows)
    for i in range(n):
        a1, a2, b = rows[i]
        # equality-constrained minimum on the line a . u = b
        w1 = (q22 * a1 - q12 * a2) / det
        w2 = (q11 * a2 - q12 * a1) / det
        denom = a1 * w1 + a2 * w2
        if denom > 1e-300:
            lam = (b - a1 * r1 - a2 * r2) / denom
            consider(r1 + lam * w1, r2 + lam * w2)
        for j in range(i + 1, n):
            c1, c2, d = rows[j]
            det2 = a1 * c2 - a2 * c1
            if abs(det2) < 1e-12:
                continue
            consider((b * c2 - d * a2) / det2, (a1 * d - c1 * b) / det2)
    if best is None:
        raise QpInfeasibleError("no feasible active-set candidate")
    return np.array(best)


def solve_qp(spec: QpSpec) -> np.ndarray:
    """Exact minimizer by enumeration over active sets of size <= m.

    Raises `QpInfeasibleError` when no active-set candidate is feasible.
    """
    m = spec.u_ref.size
    if m == 2:
        return _solve_qp_2d(spec)
    G, g = spec.rows()

    # fast path: with diagonal Q the box projection of u_ref is the
    # box-constrained optimum; accept it when it meets every constraint
    if not np.any(spec.Q - np.diag(np.diagonal(spec.Q))):
        u0 = np.clip(spec.u_ref, spec.lo, spec.hi)
        if np.all(G @ u0 >= g - _FEAS_TOL):
            return u0

    Q2 = 2.0 * spec.Q
    best_u, best_obj = None, np.inf
    for size in range(m + 1):
        for subset in combinations(range(G.shape[0]), size):
            if size == 0:
                u = spec.u_ref.copy()
            else:
                Gs = G[list(subset)]
                kkt = np.zeros((m + size, m + size))
                kkt[:m, :m] = Q2
                kkt[:m, m:] = -Gs.T
                kkt[m:, :m] = Gs
                rhs = np.concatenate([Q2 @ spec.u_ref, g[list(subset)]])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                u = sol[:m]
            if np.all(G @ u >= g - _FEAS_TOL):
                d = u - spec.u_ref
                obj = d @ spec.Q @ d
                if obj < best_obj - 1e-15:
                    best_obj, best_u = obj, u
    if best_u is None:
        raise QpInfeasibleError("no feasible active-set candidate")
    return best_u


def least_infeasible_control(spec: QpSpec) -> np.ndarray:
    """Box-clipped minimizer of the worst barrier-constraint violation.

    Fallback for infeasible instances: minimize t subject to
    ``lin_u . u + t >= rhs`` over the box with t >= 0.
    """
    m = spec.u_ref.size
    n_c = len(spec.constraints)
    if n_c == 0:
        return np.clip(spec.u_ref, spec.lo, spec.hi)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.zeros((n_c, m + 1))
    b_ub = np.zeros(n_c)
    for i, con in enumerate(spec.constraints):
        A_ub[i, :m] = -con.lin_u
        A_ub[i, -1] = -1.0
        b_ub[i] = -con.rhs
    bounds = [(spec.lo[j], spec.hi[j]) for j in range(m)] + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return np.clip(spec.u_ref, spec.lo, spec.hi)
    return res.x[:m]


def kkt_residuals(spec: QpSpec, u: np.ndarray, active_tol: float = 1e-7) -> dict:
    """Stationarity / feasibility / complementarity residuals at a point.

    Multipliers for the active constraints are recovered by non-negative
    least squares on the stationarity condition.
    """
    G, g = spec.rows()
    slack = G @ u - g
    feasibility = float(max(0.0, -slack.min())) if slack.size else 0.0
    grad = 2.0 * spec.Q @ (u - spec.u_ref)
    active = np.where(slack <= active_tol)[0]
    if active.size:
        lam, _ = nnls(G[active].T, grad)
        stationarity = float(np.linalg.norm(grad - G[active].T @ lam))
        complementarity = float(np.abs(lam * slack[active]).max())
    else:
        stationarity = float(np.linalg.norm(grad))
        complementarity = 0.0
    return {
        "stationarity": stationarity,
        "feasibility": feasibility,
        "complementarity": complementarity,
    }
