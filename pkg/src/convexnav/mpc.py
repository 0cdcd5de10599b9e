"""Reference-tracking MPC posed as a condensed QP over the jerk sequence.

Cost: ``w_track (|Q_1 - Q_s|^2 + |Q_N - Q_l|^2) + w_smooth sum |u_k|^2`` plus the
terminal stop cost ``w_vend |V_N|^2 + w_aend |A_N|^2`` when the goal lies in
the region.  Every predicted position is held inside the convex region and
velocity, acceleration and jerk obey per-axis boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .dynamics import DiscreteModel, Limits, RobotState, discretize
from .errors import StartOutsideRegion
from .geom import ConvexRegion, half_planes, point_in_convex
from .qp import AdmmSolver, QpStatus, QuadraticProgram


class MpcStatus(str, Enum):
    OPTIMAL = "Optimal"
    SOFT_FALLBACK = "SoftFallback"
    FAILED = "Failed"


@dataclass(frozen=True)
class MpcParams:
    w_track: float = 10.0
    w_smooth: float = 0.01
    w_vend: float = 5.0
    w_aend: float = 5.0
    N: int = 10
    t_c: float = 0.2
    limits: Limits = field(default_factory=Limits)
    rho: float = 1.0
    max_iter: int = 4000
    tol: float = 1e-6
    soft_weight_factor: float = 1e3

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError("horizon N must be at least 2")
        if self.t_c <= 0:
            raise ValueError("t_c must be positive")
        if min(self.w_track, self.w_smooth, self.w_vend, self.w_aend) < 0:
            raise ValueError("weights must be nonnegative")

    @property
    def horizon(self) -> float:
        return self.N * self.t_c


@dataclass(frozen=True)
class MpcProblem:
    x_init: RobotState
    q_short: np.ndarray
    q_long: np.ndarray
    region: ConvexRegion
    goal_in_convex: bool = False


@dataclass
class MpcSolution:
    u_star: np.ndarray
    predicted: np.ndarray
    q_star: np.ndarray
    status: MpcStatus
    objective: float
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status != MpcStatus.FAILED

    def to_dict(self) -> dict:
        return {
            "u_star": self.u_star.tolist(),
            "predicted": self.predicted.tolist(),
            "q_star": self.q_star.tolist(),
            "status": self.status.value,
            "objective": float(self.objective),
            "iterations": int(self.iterations),
        }


@dataclass(frozen=True)
class Prediction:
    """Stacked maps ``x_i = Sx[i] x0 + Su[i] z`` for ``i = 1..N``."""

    Sx: np.ndarray
    Su: np.ndarray
    model: DiscreteModel


@lru_cache(maxsize=32)
def prediction_matrices(N: int, t_c: float) -> Prediction:
    model = discretize(t_c)
    F, G = model.F, model.G
    Sx = np.zeros((N, 6, 6))
    Su = np.zeros((N, 6, 2 * N))
    Fi = np.eye(6)
    powers = [np.eye(6)]
    for _ in range(N):
        powers.append(F @ powers[-1])
    for i in range(N):
        Fi = powers[i + 1]
        Sx[i] = Fi
        for k in range(i + 1):
            Su[i, :, 2 * k : 2 * k + 2] = powers[i - k] @ G
    for arr in (Sx, Su):
        arr.setflags(write=False)
    return Prediction(Sx, Su, model)


def _add_square(P, q, C, d, r, w):
    """Add ``w |C z + d - r|^2`` to ``0.5 z'Pz + q'z + const``; return const."""
    res = d - r
    P += 2.0 * w * C.T @ C
    q += 2.0 * w * C.T @ res
    return w * float(res @ res)


def assemble_qp(problem: MpcProblem, params: MpcParams) -> QuadraticProgram:
    """Condensed QP in the ``2N`` jerk variables ``[j0x, j0y, j1x, ...]``.

    Row groups (in order): ``containment`` (N x edges), ``jerk``, ``velocity``,
    ``acceleration`` (each N x 2 axes x 2 sides).
    """
    N = params.N
    pred = prediction_matrices(N, float(params.t_c))
    x0 = problem.x_init.as_array()
    free = pred.Sx @ x0
    Su = pred.Su
    n = 2 * N
    P = np.zeros((n, n))
    q = np.zeros(n)
    const = 0.0
    const += _add_square(P, q, Su[0, 0:2], free[0, 0:2], np.asarray(problem.q_short, float), params.w_track)
    const += _add_square(P, q, Su[-1, 0:2], free[-1, 0:2], np.asarray(problem.q_long, float), params.w_track)
    P += 2.0 * params.w_smooth * np.eye(n)
    if problem.goal_in_convex:
        const += _add_square(P, q, Su[-1, 2:4], free[-1, 2:4], np.zeros(2), params.w_vend)
        const += _add_square(P, q, Su[-1, 4:6], free[-1, 4:6], np.zeros(2), params.w_aend)

    normals, offsets = half_planes(problem.region.vertices)
    pos_map = Su[:, 0:2, :]
    contain_A = np.einsum("jk,ikn->ijn", normals, pos_map).reshape(-1, n)
    contain_b = (offsets[None, :] - free[:, 0:2] @ normals.T).reshape(-1)

    lim = params.limits
    eye = np.eye(n)
    jerk_A = np.vstack((eye, -eye))
    jerk_b = np.full(2 * n, lim.j_max)
    vel = Su[:, 2:4, :].reshape(n, n)
    vel_free = free[:, 2:4].reshape(n)
    vel_A = np.vstack((vel, -vel))
    vel_b = np.concatenate((lim.v_max - vel_free, lim.v_max + vel_free))
    acc = Su[:, 4:6, :].reshape(n, n)
    acc_free = free[:, 4:6].reshape(n)
    acc_A = np.vstack((acc, -acc))
    acc_b = np.concatenate((lim.a_max - acc_free, lim.a_max + acc_free))

    A = np.vstack((contain_A, jerk_A, vel_A, acc_A))
    b = np.concatenate((contain_b, jerk_b, vel_b, acc_b))
    sizes = [contain_A.shape[0], jerk_A.shape[0], vel_A.shape[0], acc_A.shape[0]]
    names = ["containment", "jerk", "velocity", "acceleration"]
    groups = {}
    start = 0
    for name, size in zip(names, sizes):
        groups[name] = slice(start, start + size)
        start += size
    return QuadraticProgram(0.5 * (P + P.T), q, A, b, const, groups)


def soften_containment(qp: QuadraticProgram, params: MpcParams) -> QuadraticProgram:
    """Append one nonnegative slack per horizon step to the containment rows.

    Slacks cost ``soft_weight_factor * w_track * s^2``; box rows stay hard.
    """
    N = params.N
    n = qp.n_vars
    m = qp.n_rows
    rows = qp.groups["containment"]
    per_step = (rows.stop - rows.start) // N
    P = np.zeros((n + N, n + N))
    P[:n, :n] = qp.P
    P[n:, n:] = 2.0 * params.soft_weight_factor * max(params.w_track, 1e-9) * np.eye(N)
    q = np.concatenate((qp.q, np.zeros(N)))
    A = np.zeros((m + N, n + N))
    A[:m, :n] = qp.A
    for i in range(N):
        A[rows.start + i * per_step : rows.start + (i + 1) * per_step, n + i] = -1.0
    A[m:, n:] = -np.eye(N)
    b = np.concatenate((qp.b, np.zeros(N)))
    groups = dict(qp.groups)
    groups["slack"] = slice(m, m + N)
    return QuadraticProgram(P, q, A, b, qp.const, groups)


def rollout(x_init: RobotState, u: np.ndarray, params: MpcParams) -> np.ndarray:
    pred = prediction_matrices(params.N, float(params.t_c))
    return pred.Sx @ x_init.as_array() + pred.Su @ np.asarray(u, float).reshape(-1)


class MpcController:
    """Holds a solver configuration; one instance per worker thread."""

    def __init__(self, params: MpcParams | None = None):
        self.params = params or MpcParams()
        self.solver = AdmmSolver(rho=self.params.rho, max_iter=self.params.max_iter, tol=self.params.tol)

    def solve(self, problem: MpcProblem) -> MpcSolution:
        params = self.params
        if not point_in_convex(problem.region, problem.x_init.position, 1e-6):
            raise StartOutsideRegion("MPC start position is outside the convex region")
        qp = assemble_qp(problem, params)
        res = self.solver.solve(qp)
        iterations = res.iterations
        status = MpcStatus.OPTIMAL
        z = res.x
        objective = res.objective
        if res.status != QpStatus.OPTIMAL:
            soft = soften_containment(qp, params)
            res2 = self.solver.solve(soft)
            iterations += res2.iterations
            if res2.status == QpStatus.OPTIMAL:
                status = MpcStatus.SOFT_FALLBACK
                z = res2.x[: qp.n_vars]
                objective = res2.objective
            else:
                status = MpcStatus.FAILED
                z = np.zeros(qp.n_vars)
                objective = float("nan")
        u = z.reshape(params.N, 2)
        predicted = rollout(problem.x_init, z, params)
        return MpcSolution(
            u_star=u,
            predicted=predicted,
            q_star=predicted[:, 0:2].copy(),
            status=status,
            objective=float(objective),
            iterations=int(iterations),
        )


def solve_mpc(problem: MpcProblem, params: MpcParams | None = None) -> MpcSolution:
    return MpcController(params).solve(problem)
