"""Independent reference computations used by tests, benches and selftest.

Each oracle reaches the answer by a different route from the production
code: numerical integration instead of closed forms, marching instead of
analytic intersection, brute-force loops instead of vectorised recurrences.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .dynamics import continuous_matrices


def rk4_transition(t_c: float, substeps: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the continuous triple integrator with classical RK4."""
    Ac, Bc = continuous_matrices()
    h = t_c / substeps

    def flow(x, u):
        return Ac @ x + Bc @ u

    def integrate(x0, u):
        x = x0.copy()
        for _ in range(substeps):
            k1 = flow(x, u)
            k2 = flow(x + 0.5 * h * k1, u)
            k3 = flow(x + 0.5 * h * k2, u)
            k4 = flow(x + h * k3, u)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    n, m = Ac.shape[0], Bc.shape[1]
    X = integrate(np.eye(n), np.zeros((m, n)))
    U = integrate(np.zeros((n, m)), np.eye(m))
    return X, U


def brute_force_in_convex(vertices, q, tol: float = 1e-9) -> bool:
    """Loop over every edge, closing edge included; clockwise means right turns."""
    v = [tuple(map(float, p)) for p in vertices]
    qx, qy = float(q[0]), float(q[1])
    for i in range(len(v)):
        ax, ay = v[i]
        bx, by = v[(i + 1) % len(v)]
        ex, ey = bx - ax, by - ay
        cross = ex * (qy - ay) - ey * (qx - ax)
        if cross / math.hypot(ex, ey) > tol:
            return False
    return True


def bisection_ray_distance(vertices, start, theta: float, hi: float = 100.0, tol: float = 1e-12) -> float:
    d = np.array([math.cos(theta), math.sin(theta)])
    s = np.asarray(start, dtype=float)
    lo = 0.0
    while brute_force_in_convex(vertices, s + hi * d, 0.0):
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if brute_force_in_convex(vertices, s + mid * d, 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def projected_gradient_box_qp(P, q, lo, hi, iters: int = 50_000, tol: float = 1e-14) -> np.ndarray:
    """Accelerated projected gradient for ``min 0.5 x'Px + q'x`` over a box."""
    P = np.asarray(P, float)
    q = np.asarray(q, float)
    L = float(np.max(np.linalg.eigvalsh(P)))
    x = np.clip(np.zeros_like(q), lo, hi)
    y = x.copy()
    t = 1.0
    for _ in range(iters):
        x_new = np.clip(y - (P @ y + q) / L, lo, hi)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x, t = x_new, t_new
    return x


def min_norm_tracking_jerks(Sx, Su, x0, q_short, q_long) -> np.ndarray:
    """Smallest jerk sequence that hits ``q_short`` at step 1 and ``q_long`` at step N."""
    C = np.vstack((Su[0, 0:2], Su[-1, 0:2]))
    target = np.concatenate((np.asarray(q_short, float) - (Sx[0] @ x0)[0:2], np.asarray(q_long, float) - (Sx[-1] @ x0)[0:2]))
    return np.linalg.pinv(C) @ target


def _point_blocked(world, pts: np.ndarray, dyn_pos: np.ndarray | None = None) -> np.ndarray:
    ox, oy = world.origin_offset
    blocked = (pts[:, 0] < ox) | (pts[:, 0] > ox + world.arena_w) | (pts[:, 1] < oy) | (pts[:, 1] > oy + world.arena_h)
    for poly in world.static_polys:
        inside = np.ones(len(pts), dtype=bool)
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
            inside &= cross >= 0.0
        blocked |= inside
    pos = world.dyn_pos if dyn_pos is None else dyn_pos
    for c, r in zip(pos, world.dyn_radius):
        blocked |= (pts[:, 0] - c[0]) ** 2 + (pts[:, 1] - c[1]) ** 2 <= r * r
    return blocked


def marching_range(world, position, theta: float, max_range: float, step: float = 1e-3) -> float:
    """First sample along the beam that lands in an obstacle, wall or outside the arena."""
    s = np.arange(0.0, max_range + step, step)
    pts = np.asarray(position, float) + s[:, None] * np.array([math.cos(theta), math.sin(theta)])
    hit = np.flatnonzero(_point_blocked(world, pts))
    return float(min(s[hit[0]], max_range)) if len(hit) else float(max_range)


def brute_force_gae(rewards, values, dones, gamma: float, lam: float, last_value: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Explicit discounted sum of TD errors up to the next terminal step."""
    T = len(rewards)
    nxt = [values[t + 1] if t + 1 < T else last_value for t in range(T)]
    deltas = [rewards[t] + gamma * nxt[t] * (0.0 if dones[t] else 1.0) - values[t] for t in range(T)]
    adv = np.zeros(T)
    for t in range(T):
        total = 0.0
        for k in range(t, T):
            total += (gamma * lam) ** (k - t) * deltas[k]
            if dones[k]:
                break
        adv[t] = total
    return adv, adv + np.asarray(values, float)


def central_difference(f: Callable[[], float], params: list[np.ndarray], eps: float = 1e-5) -> list[np.ndarray]:
    """Gradient of ``f`` by perturbing each entry of ``params`` in place."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + eps
            up = f()
            p[i] = old - eps
            down = f()
            p[i] = old
            g[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def max_relative_error(a: list[np.ndarray], b: list[np.ndarray], floor: float = 1e-8) -> float:
    worst = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


def squashed_mass(log_density: Callable[[np.ndarray], np.ndarray], n: int = 200_001) -> float:
    """Midpoint-rule integral of a 1D density over the open unit interval."""
    a = (np.arange(n) + 0.5) / n
    return float(np.sum(np.exp(log_density(a))) / n)
