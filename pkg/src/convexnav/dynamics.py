"""Planar triple integrator (position, velocity, acceleration; jerk input).

State vectors use the interleaved layout ``[px, py, vx, vy, ax, ay]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveStep


@dataclass(frozen=True)
class Limits:
    v_max: float = 3.0
    a_max: float = 3.0
    j_max: float = 10.0


@dataclass(frozen=True)
class RobotState:
    px: float = 0.0
    py: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.px, self.py])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def acceleration(self) -> np.ndarray:
        return np.array([self.ax, self.ay])

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.vx, self.vy, self.ax, self.ay])

    @classmethod
    def from_array(cls, x) -> "RobotState":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(*(float(v) for v in x))

    def with_position(self, px: float, py: float) -> "RobotState":
        return RobotState(px, py, self.vx, self.vy, self.ax, self.ay)

    def within(self, limits: Limits, tol: float = 1e-6) -> bool:
        return (
            abs(self.vx) <= limits.v_max + tol
            and abs(self.vy) <= limits.v_max + tol
            and abs(self.ax) <= limits.a_max + tol
            and abs(self.ay) <= limits.a_max + tol
        )


@dataclass(frozen=True)
class Jerk:
    jx: float = 0.0
    jy: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.jx, self.jy])


@dataclass(frozen=True)
class DiscreteModel:
    F: np.ndarray
    G: np.ndarray
    t_c: float


def axis_blocks(t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis transition block and input column for a step of length ``t``."""
    A = np.array([[1.0, t, t * t / 2.0], [0.0, 1.0, t], [0.0, 0.0, 1.0]])
    B = np.array([t**3 / 6.0, t * t / 2.0, t])
    return A, B


def discretize(t_c: float) -> DiscreteModel:
    """Exact zero-order-hold discretisation for a constant jerk over ``t_c``."""
    if not t_c > 0:
        raise NonPositiveStep(f"control period must be positive, got {t_c}")
    A, B = axis_blocks(t_c)
    F = np.kron(A, np.eye(2))
    G = np.kron(B.reshape(3, 1), np.eye(2))
    return DiscreteModel(F, G, float(t_c))


def step(x: RobotState, u: Jerk, model: DiscreteModel) -> RobotState:
    return RobotState.from_array(model.F @ x.as_array() + model.G @ u.as_array())


def step_array(x: np.ndarray, u: np.ndarray, model: DiscreteModel) -> np.ndarray:
    return model.F @ x + model.G @ u


def continuous_matrices() -> tuple[np.ndarray, np.ndarray]:
    """``xdot = A x + B u`` for the interleaved layout."""
    A = np.zeros((6, 6))
    A[0, 2] = A[1, 3] = A[2, 4] = A[3, 5] = 1.0
    B = np.zeros((6, 2))
    B[4, 0] = B[5, 1] = 1.0
    return A, B
