"""Dense operator-splitting QP solver.

Solves ``min 0.5 z'Pz + q'z + const  s.t.  A z <= b`` with an ADMM iteration in
the style of OSQP: Ruiz-equilibrated data, a pre-inverted linear system (the
problems here have a few dozen variables), over-relaxation, periodic
active-set polishing and a primal infeasibility certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass
class QuadraticProgram:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    const: float = 0.0
    groups: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.P = np.asarray(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)

    @property
    def n_vars(self) -> int:
        return self.q.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.P @ z + self.q @ z + self.const)

    def max_violation(self, z: np.ndarray) -> float:
        if self.n_rows == 0:
            return 0.0
        return float(max(0.0, np.max(self.A @ z - self.b)))


@dataclass
class QpResult:
    x: np.ndarray
    y: np.ndarray
    status: QpStatus
    iterations: int
    objective: float
    prim_res: float
    dual_res: float
    polished: bool = False
    fixed_point_residuals: list[float] | None = None


def _ruiz(P: np.ndarray, A: np.ndarray, q: np.ndarray, iters: int):
    n, m = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    Ps, As, qs = P.copy(), A.copy(), q.copy()
    c = 1.0
    for _ in range(iters):
        absP = np.abs(Ps)
        absA = np.abs(As)
        col = absP.max(axis=0)
        if m:
            np.maximum(col, absA.max(axis=0), out=col)
            e = 1.0 / np.sqrt(np.clip(absA.max(axis=1), 1e-4, 1e4))
        else:
            e = E[:0]
        d = 1.0 / np.sqrt(np.clip(col, 1e-4, 1e4))
        Ps *= d[:, None]
        Ps *= d[None, :]
        As *= e[:, None]
        As *= d[None, :]
        qs *= d
        D *= d
        E *= e
    gamma = max(float(np.abs(Ps).max(axis=0).mean()), float(np.abs(qs).max(initial=0.0)), 1e-4)
    gamma = 1.0 / min(max(gamma, 1e-4), 1e4)
    return Ps * gamma, As, qs * gamma, D, E, gamma


class AdmmSolver:
    """Reusable solver; holds no state between ``solve`` calls."""

    def __init__(
        self,
        rho: float = 1.0,
        sigma: float = 1e-6,
        alpha: float = 1.6,
        max_iter: int = 4000,
        tol: float = 1e-6,
        check_every: int = 10,
        polish: bool = True,
        scaling_iters: int = 5,
        infeasibility_tol: float = 1e-6,
        adaptive_rho: bool = True,
        record_residuals: bool = False,
    ):
        self.rho = rho
        self.sigma = sigma
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.check_every = check_every
        self.polish = polish
        self.scaling_iters = scaling_iters
        self.infeasibility_tol = infeasibility_tol
        self.adaptive_rho = adaptive_rho
        self.record_residuals = record_residuals

    def _residuals(self, qp: QuadraticProgram, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        prim = qp.max_violation(x)
        grad = qp.P @ x + qp.q
        if qp.n_rows:
            grad = grad + qp.A.T @ y
        return prim, float(np.max(np.abs(grad))) if grad.size else 0.0

    def _polish(self, qp: QuadraticProgram, active: np.ndarray):
        n = qp.n_vars
        Aa = qp.A[active]
        k = active.size
        delta = 1e-9
        K = np.zeros((n + k, n + k))
        K[:n, :n] = qp.P
        K[:n, n:] = Aa.T
        K[n:, :n] = Aa
        Kreg = K.copy()
        Kreg[:n, :n] += delta * np.eye(n)
        Kreg[n:, n:] -= delta * np.eye(k)
        rhs = np.concatenate((-qp.q, qp.b[active]))
        try:
            sol = np.linalg.solve(Kreg, rhs)
            for _ in range(3):
                sol = sol + np.linalg.solve(Kreg, rhs - K @ sol)
        except np.linalg.LinAlgError:
            return None
        xp = sol[:n]
        yp = np.zeros(qp.n_rows)
        yp[active] = sol[n:]
        if np.any(yp < -self.tol) or not np.all(np.isfinite(xp)):
            return None
        yp = np.maximum(yp, 0.0)
        prim, dual = self._residuals(qp, xp, yp)
        if prim <= self.tol and dual <= self.tol:
            return xp, yp, prim, dual
        return None

    def solve(self, qp: QuadraticProgram) -> QpResult:
        n, m = qp.n_vars, qp.n_rows
        if m == 0:
            return self._solve_unconstrained(qp)
        P, A, q, D, E, c = _ruiz(qp.P, qp.A, qp.q, self.scaling_iters)
        b = E * qp.b
        rho, sigma, alpha = self.rho, self.sigma, self.alpha
        K = P + sigma * np.eye(n) + rho * (A.T @ A)
        Kinv = np.linalg.inv(K)
        x = np.zeros(n)
        z = np.minimum(np.zeros(m), b)
        y = np.zeros(m)
        y_check = y.copy()
        history: list[float] | None = [] if self.record_residuals else None
        v_prev = z + y / rho
        x_u = D * x
        y_u = E * y / c
        prim = dual = np.inf
        status = QpStatus.MAX_ITER
        polished = False
        it = 0
        for it in range(1, self.max_iter + 1):
            x_tilde = Kinv @ (sigma * x - q + A.T @ (rho * z - y))
            z_tilde = A @ x_tilde
            x_next = alpha * x_tilde + (1.0 - alpha) * x
            z_relax = alpha * z_tilde + (1.0 - alpha) * z
            z_next = np.minimum(z_relax + y / rho, b)
            y = y + rho * (z_relax - z_next)
            if history is not None:
                v = z_next + y / rho
                history.append(float(sigma * np.sum((x_next - x) ** 2) + rho * np.sum((v - v_prev) ** 2)))
                v_prev = v
            x, z = x_next, z_next
            if it % self.check_every and it != self.max_iter:
                continue
            x_u = D * x
            y_u = E * y / c
            y_u = np.maximum(y_u, 0.0)
            prim, dual = self._residuals(qp, x_u, y_u)
            if prim <= self.tol and dual <= self.tol:
                status = QpStatus.OPTIMAL
                break
            if self.polish and m:
                out = self._polish(qp, np.flatnonzero(b - z < y))
                if out is not None:
                    x_u, y_u, prim, dual = out
                    status = QpStatus.OPTIMAL
                    polished = True
                    break
            if m and self._certify_infeasible(qp, E * (y - y_check) / c):
                status = QpStatus.INFEASIBLE
                break
            y_check = y.copy()
            if self.adaptive_rho:
                new_rho = self._rho_estimate(P, A, q, x, z, y, rho)
                if new_rho > 5.0 * rho or new_rho < 0.2 * rho:
                    rho = new_rho
                    Kinv = np.linalg.inv(P + sigma * np.eye(n) + rho * (A.T @ A))
                    v_prev = z + y / rho
        else:
            x_u = D * x
            y_u = np.maximum(E * y / c, 0.0)
        return QpResult(
            x=x_u,
            y=y_u,
            status=status,
            iterations=it,
            objective=qp.objective(x_u),
            prim_res=float(prim),
            dual_res=float(dual),
            polished=polished,
            fixed_point_residuals=history,
        )

    @staticmethod
    def _rho_estimate(P, A, q, x, z, y, rho):
        Ax = A @ x
        prim = np.max(np.abs(Ax - z)) / max(np.max(np.abs(Ax)), np.max(np.abs(z)), 1e-12)
        Aty = A.T @ y
        Px = P @ x
        dual = np.max(np.abs(Px + q + Aty)) / max(np.max(np.abs(Px)), np.max(np.abs(Aty)), np.max(np.abs(q)), 1e-12)
        ratio = np.sqrt(max(prim, 1e-12) / max(dual, 1e-12))
        return float(np.clip(rho * ratio, 1e-6, 1e6))

    def _solve_unconstrained(self, qp: QuadraticProgram) -> QpResult:
        x = np.linalg.lstsq(qp.P, -qp.q, rcond=None)[0]
        y = np.zeros(0)
        prim, dual = self._residuals(qp, x, y)
        status = QpStatus.OPTIMAL if dual <= self.tol else QpStatus.MAX_ITER
        return QpResult(x, y, status, 0, qp.objective(x), prim, dual, fixed_point_residuals=[] if self.record_residuals else None)

    def _certify_infeasible(self, qp: QuadraticProgram, dy: np.ndarray) -> bool:
        # every row is upper-bounded only, so a certificate needs dy >= 0
        dy = np.maximum(dy, 0.0)
        norm = np.max(np.abs(dy)) if dy.size else 0.0
        if norm <= 1e-12:
            return False
        eps = self.infeasibility_tol
        return bool(np.max(np.abs(qp.A.T @ dy)) <= eps * norm and qp.b @ dy < -eps * norm)


def solve_qp(qp: QuadraticProgram, max_iter: int = 4000, tol: float = 1e-6) -> tuple[np.ndarray, QpStatus]:
    """Solve ``qp`` and return ``(solution, status)``.

    ``QpStatus.INFEASIBLE`` and ``QpStatus.MAX_ITER`` both mean the vector is
    not a certified optimum.
    """
    res = AdmmSolver(max_iter=max_iter, tol=tol).solve(qp)
    return res.x, res.status
