"""Barrier functions with analytic derivatives, and their belief composition.

Two barrier margins are provided, both evaluated between the robot state
``x = (p_x, p_y, theta)`` and an object position ``o = (q_x, q_y)``:

* a field-of-view sector margin (one per sector edge), keeping a disk of
  radius ``r_o`` around the object inside an angular sector of amplitude
  ``beta`` centered on the robot's local x-axis, and
* a collision margin, the distance between the footprint circles measured
  from the robot's geometric center (offset ``s_e`` ahead of the rear axle).

Each evaluation carries the gradient and Hessian with respect to both
arguments. Cross second derivatives are never needed by the safety filter
and are not computed.

``compose_bcbf`` turns per-sample evaluations plus a risk-bound weight
vector into the belief barrier: value, robot-state derivative blocks, and
sparse per-sample belief derivative blocks (already weight-scaled). The
weights are locally constant in the samples, so the composition is a plain
weighted sum; tie points of the underlying sort have measure zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .risk_bounds import BoundResult
from .sde import ModelParams, ObjectState, RobotState


class DegenerateGeometryError(ValueError):
    """Object center coincides with the robot's offset center."""


@dataclass
class BarrierEval:
    """Barrier value and derivatives for a single (robot, object) pair."""

    h: float
    grad_x: np.ndarray   # (3,)
    hess_x: np.ndarray   # (3, 3)
    grad_o: np.ndarray   # (2,)
    hess_o: np.ndarray   # (2, 2)


@dataclass
class BcbfEval:
    """Composed belief barrier: weighted combination of per-sample barriers.

    ``grad_b`` / ``hess_b`` hold the weight-scaled belief derivative blocks
    for the samples in ``active_set`` (row j belongs to sample
    ``active_set[j]``); all other belief blocks are zero.
    """

    h_tilde: float
    grad_x: np.ndarray      # (3,)
    hess_x: np.ndarray      # (3, 3)
    active_set: np.ndarray  # (K,) original sample indices
    grad_b: np.ndarray      # (K, 2) rows are w_i * grad_o_i
    hess_b: np.ndarray      # (K, 2, 2) blocks are w_i * hess_o_i
    b_coeff: float
    essential_lb: float

    @property
    def grad_b_blocks(self) -> dict:
        return {int(i): self.grad_b[j] for j, i in enumerate(self.active_set)}

    @property
    def hess_b_blocks(self) -> dict:
        return {int(i): self.hess_b[j] for j, i in enumerate(self.active_set)}


def local_frame(x: RobotState, o: ObjectState) -> np.ndarray:
    """Object coordinates in the robot frame: R(theta)^T (q - p)."""
    ct, st = math.cos(x.theta), math.sin(x.theta)
    dx, dy = o.q_x - x.p_x, o.q_y - x.p_y
    return np.array([ct * dx + st * dy, -st * dx + ct * dy])


def fov_essential_lb(params: ModelParams) -> float:
    """Infimum of the sector margin over a bounded workspace."""
    half = params.beta / 2.0
    r = params.workspace_radius
    return -(math.tan(half) * r + params.r_o / math.cos(half) + r)


def collision_essential_lb(params: ModelParams) -> float:
    """Exact infimum of the collision margin."""
    return -(params.r_e + params.r_o)


def fov_barrier_batch(x: RobotState, samples: np.ndarray, params: ModelParams,
                      side: int):
    """Vectorized sector-edge margin with derivatives for many samples.

    Returns ``(h, grad_x, hess_x, grad_o, hess_o)`` with leading dimension
    equal to ``len(samples)``.
    """
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    s = -1.0 if side == 1 else 1.0
    half = params.beta / 2.0
    a = math.tan(half)
    c = params.r_o / math.cos(half)
    ct, st = math.cos(x.theta), math.sin(x.theta)
    q = np.atleast_2d(np.asarray(samples, dtype=float))
    dx = q[:, 0] - x.p_x
    dy = q[:, 1] - x.p_y
    pqx = ct * dx + st * dy
    pqy = -st * dx + ct * dy
    n = q.shape[0]

    h = a * pqx + s * pqy - c

    grad_x = np.empty((n, 3))
    grad_x[:, 0] = -a * ct + s * st
    grad_x[:, 1] = -a * st - s * ct
    grad_x[:, 2] = a * pqy - s * pqx

    hess_x = np.zeros((n, 3, 3))
    hess_x[:, 0, 2] = hess_x[:, 2, 0] = a * st + s * ct
    hess_x[:, 1, 2] = hess_x[:, 2, 1] = -a * ct + s * st
    hess_x[:, 2, 2] = -a * pqx - s * pqy

    grad_o = np.empty((n, 2))
    grad_o[:, 0] = a * ct - s * st
    grad_o[:, 1] = a * st + s * ct
    hess_o = np.zeros((n, 2, 2))
    return h, grad_x, hess_x, grad_o, hess_o


def fov_barrier_values(x: RobotState, samples: np.ndarray, params: ModelParams,
                       side: int) -> np.ndarray:
    """Sector-edge margin values only (fast path for the control loop)."""
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    s = -1.0 if side == 1 else 1.0
    half = params.beta / 2.0
    ct, st = math.cos(x.theta), math.sin(x.theta)
    q = np.atleast_2d(np.asarray(samples, dtype=float))
    dx = q[:, 0] - x.p_x
    dy = q[:, 1] - x.p_y
    return (math.tan(half) * (ct * dx + st * dy) + s * (-st * dx + ct * dy)
            - params.r_o / math.cos(half))


def fov_barrier(x: RobotState, o: ObjectState, params: ModelParams,
                side: int) -> BarrierEval:
    h, gx, hx, go, ho = fov_barrier_batch(x, o.as_array()[None, :], params, side)
    return BarrierEval(float(h[0]), gx[0], hx[0], go[0], ho[0])


_DEGENERATE_RADIUS = 1e-9


def collision_barrier_batch(x: RobotState, samples: np.ndarray,
                            params: ModelParams):
    """Vectorized collision margin with derivatives for many samples."""
    ct, st = math.cos(x.theta), math.sin(x.theta)
    se = params.s_e
    q = np.atleast_2d(np.asarray(samples, dtype=float))
    px = x.p_x - q[:, 0] + se * ct
    py = x.p_y - q[:, 1] + se * st
    r = np.hypot(px, py)
    if np.any(r < _DEGENERATE_RADIUS):
        raise DegenerateGeometryError("object center at the robot's offset center")
    nx, ny = px / r, py / r
    n = q.shape[0]

    h = r - (params.r_e + params.r_o)

    grad_x = np.empty((n, 3))
    grad_x[:, 0] = nx
    grad_x[:, 1] = ny
    grad_x[:, 2] = se * (-st * nx + ct * ny)
    grad_o = np.empty((n, 2))
    grad_o[:, 0] = -nx
    grad_o[:, 1] = -ny

    # hessian wrt the offset vector: (I - n n^T) / r
    hess_o = np.empty((n, 2, 2))
    hess_o[:, 0, 0] = (1.0 - nx * nx) / r
    hess_o[:, 0, 1] = hess_o[:, 1, 0] = -nx * ny / r
    hess_o[:, 1, 1] = (1.0 - ny * ny) / r

    # chain rule through J = d(offset)/dx plus the curvature of the offset in theta
    J = np.array([[1.0, 0.0, -se * st],
                  [0.0, 1.0, se * ct]])
    hess_x = np.einsum("ia,nij,jb->nab", J, hess_o, J)
    hess_x[:, 2, 2] += -se * (nx * ct + ny * st)
    return h, grad_x, hess_x, grad_o, hess_o


def collision_barrier_values(x: RobotState, samples: np.ndarray,
                             params: ModelParams) -> np.ndarray:
    """Collision margin values only (fast path for the control loop)."""
    ct, st = math.cos(x.theta), math.sin(x.theta)
    q = np.atleast_2d(np.asarray(samples, dtype=float))
    px = x.p_x - q[:, 0] + params.s_e * ct
    py = x.p_y - q[:, 1] + params.s_e * st
    return np.hypot(px, py) - (params.r_e + params.r_o)


def collision_barrier(x: RobotState, o: ObjectState,
                      params: ModelParams) -> BarrierEval:
    h, gx, hx, go, ho = collision_barrier_batch(x, o.as_array()[None, :], params)
    return BarrierEval(float(h[0]), gx[0], hx[0], go[0], ho[0])


def compose_active(bound: BoundResult, essential_lb: float,
                   grad_x_a: np.ndarray, hess_x_a: np.ndarray,
                   grad_o_a: np.ndarray, hess_o_a: np.ndarray) -> BcbfEval:
    """Weight-combine derivative arrays given for the active samples only.

    Row j of each array must belong to sample ``bound.active_indices[j]``.
    """
    active = bound.active_indices
    w = bound.weights[active]
    gx = w @ grad_x_a if active.size else np.zeros(3)
    hx = np.einsum("k,kab->ab", w, hess_x_a) if active.size else np.zeros((3, 3))
    gb = w[:, None] * grad_o_a
    hb = w[:, None, None] * hess_o_a
    return BcbfEval(h_tilde=bound.value, grad_x=gx, hess_x=hx,
                    active_set=active, grad_b=gb, hess_b=hb,
                    b_coeff=bound.b_coeff, essential_lb=essential_lb)


def compose_batch(bound: BoundResult, essential_lb: float, grad_x: np.ndarray,
                  hess_x: np.ndarray, grad_o: np.ndarray,
                  hess_o: np.ndarray) -> BcbfEval:
    """Weight-combine per-sample derivative arrays restricted to the active set.

    The derivative arrays must be indexed by original sample index and cover
    at least the active set of `bound` (rows outside it are ignored).
    """
    active = bound.active_indices
    return compose_active(bound, essential_lb, grad_x[active], hess_x[active],
                          grad_o[active], hess_o[active])


def compose_bcbf(evals, bound: BoundResult, essential_lb: float = 0.0) -> BcbfEval:
    """Compose per-sample `BarrierEval`s under a risk-bound weight vector.

    The bound must have been computed over the N values ``evals[i].h`` in
    the same order.
    """
    if len(evals) != bound.weights.size:
        raise ValueError(
            f"{len(evals)} barrier evaluations vs {bound.weights.size} weights"
        )
    grad_x = np.stack([e.grad_x for e in evals])
    hess_x = np.stack([e.hess_x for e in evals])
    grad_o = np.stack([e.grad_o for e in evals])
    hess_o = np.stack([e.hess_o for e in evals])
    return compose_batch(bound, essential_lb, grad_x, hess_x, grad_o, hess_o)
