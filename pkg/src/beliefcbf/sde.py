"""Robot and object stochastic dynamics with a fixed-step Euler-Maruyama stepper.

The robot is a planar unicycle with additive diagonal diffusion; the moving
object is a single integrator driven by a constant velocity estimate plus
diagonal diffusion. Both are integrated with the same elementwise
Euler-Maruyama step; the caller owns all state and noise streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = (theta + math.pi) % TWO_PI - math.pi
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass
class RobotState:
    p_x: float
    p_y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_x, self.p_y, self.theta])

    @classmethod
    def from_array(cls, arr) -> "RobotState":
        return cls(float(arr[0]), float(arr[1]), wrap_angle(float(arr[2])))


@dataclass
class ControlInput:
    u_v: float
    u_omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u_v, self.u_omega])


@dataclass
class ObjectState:
    q_x: float
    q_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q_x, self.q_y])


@dataclass
class ModelParams:
    """Geometry and diffusion parameters shared by both scenarios.

    ``sigma_diag`` is the robot diffusion, ``d_diag`` the object diffusion,
    ``r_e``/``r_o`` the robot/object footprint radii, ``s_e`` the
    rear-axle-to-center offset, ``beta`` the field-of-view amplitude in
    radians, and ``workspace_radius`` bounds the arena (it only enters the
    essential lower bound of the field-of-view margin).
    """

    sigma_diag: np.ndarray = field(default_factory=lambda: np.array([0.03, 0.03, 0.01]))
    d_diag: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1]))
    r_e: float = 0.15
    r_o: float = 0.1
    s_e: float = 0.05
    beta: float = math.radians(40.0)
    object_velocity: np.ndarray = field(default_factory=lambda: np.array([0.75, -0.75]))
    workspace_radius: float = 20.0

    def __post_init__(self):
        self.sigma_diag = np.asarray(self.sigma_diag, dtype=float)
        self.d_diag = np.asarray(self.d_diag, dtype=float)
        self.object_velocity = np.asarray(self.object_velocity, dtype=float)
        if np.any(self.sigma_diag <= 0) or np.any(self.d_diag <= 0):
            raise ValueError("diffusion diagonals must be strictly positive")
        if self.r_e <= 0 or self.r_o <= 0:
            raise ValueError("footprint radii must be positive")
        if not 0.0 < self.beta < math.pi:
            raise ValueError("beta must be in (0, pi)")


def robot_drift(x: RobotState, u: ControlInput) -> np.ndarray:
    """Unicycle drift (u_v cos(theta), u_v sin(theta), u_omega)."""
    return np.array([
        u.u_v * math.cos(x.theta),
        u.u_v * math.sin(x.theta),
        u.u_omega,
    ])


def object_drift(o: ObjectState, velocity) -> np.ndarray:
    """Single-integrator drift: the velocity, independent of the state."""
    return np.asarray(velocity, dtype=float)


def em_step(state, drift, diffusion_diag, dt: float, gaussian_noise) -> np.ndarray:
    """One Euler-Maruyama step: state + drift*dt + diffusion * sqrt(dt) * noise."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    state = np.asarray(state, dtype=float)
    return state + np.asarray(drift) * dt + np.asarray(diffusion_diag) * math.sqrt(dt) * np.asarray(gaussian_noise)
