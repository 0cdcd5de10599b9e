"""Randomised oracle suites with timing, shared by the CLI, selftest and tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import RawAction, decode, reach_radii
from .dynamics import RobotState, discretize
from .env import STAGES, EnvConfig, generate_scenario, raycast
from .geom import (
    ConvexRegion,
    build_convex_region,
    normalize_vertex_count,
    point_in_convex,
    points_in_convex,
)
from .mpc import MpcController, MpcParams, MpcProblem, MpcStatus
from .oracles import brute_force_in_convex, marching_range, projected_gradient_box_qp, rk4_transition
from .qp import AdmmSolver, QpStatus, QuadraticProgram


@dataclass
class SuiteReport:
    name: str
    passed: bool
    cases: int
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        extras = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.cases} cases) {extras}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def random_cloud(rng: np.random.Generator, n_points: int = 360, r_lo: float = 0.5, r_hi: float = 6.0) -> np.ndarray:
    """Uniform-area samples in an annulus around the origin."""
    ang = rng.uniform(0.0, 2.0 * math.pi, n_points)
    rad = np.sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi, n_points))
    return np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))


def random_region(rng: np.random.Generator, rnum_v: int = 16, max_range: float = 8.0, n_points: int = 360) -> ConvexRegion:
    cloud = random_cloud(rng, n_points)
    return normalize_vertex_count(build_convex_region(cloud, (0.0, 0.0), max_range, 24), rnum_v)


def geometry_suite(n: int = 10_000, seed: int = 0, n_points: int = 360, rnum_v: int = 16, max_range: float = 8.0) -> SuiteReport:
    """Origin containment and strict exclusion of every cloud point, with timing."""
    rng = np.random.default_rng(seed)
    failures = 0
    times = []
    for _ in range(n):
        cloud = random_cloud(rng, n_points)
        t0 = time.perf_counter()
        region = normalize_vertex_count(build_convex_region(cloud, (0.0, 0.0), max_range, 24), rnum_v)
        times.append(time.perf_counter() - t0)
        v = region.vertices
        nxt = np.roll(v, -1, axis=0)
        e = nxt - v
        length = np.hypot(e[:, 0], e[:, 1])
        rel = cloud[:, None, :] - v[None, :, :]
        signed = (e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]) / length[None, :]
        depth = np.min(-signed, axis=1)
        strictly_in = depth > 1e-9
        ok = (not strictly_in.any()) and point_in_convex(region, (0.0, 0.0)) and region.num_vertices == rnum_v
        failures += 0 if ok else 1
    t = np.array(times)
    median_ms = float(np.median(t) * 1e3)
    return SuiteReport(
        "geometry",
        failures == 0 and median_ms < 1.0,
        n,
        {"failures": failures, "median_ms": median_ms, "p99_ms": float(np.percentile(t, 99) * 1e3)},
    )


def action_suite(n: int = 10_000, seed: int = 1, params: MpcParams | None = None) -> SuiteReport:
    params = params or MpcParams()
    rng = np.random.default_rng(seed)
    regions = [random_region(rng) for _ in range(64)]
    failures = 0
    for k in range(n):
        region = regions[k % len(regions)]
        speed = float(rng.uniform(0.0, params.limits.v_max))
        r_s, r_l = reach_radii(params, speed)
        raw = RawAction.from_array(rng.uniform(1e-6, 1.0 - 1e-6, 4))
        refs = decode(raw, region, (0.0, 0.0), r_s, r_l)
        ok = (
            point_in_convex(region, refs.q_short)
            and point_in_convex(region, refs.q_long)
            and math.hypot(*refs.q_short) <= r_s + 1e-9
            and math.hypot(*refs.q_long) <= r_l + 1e-9
        )
        failures += 0 if ok else 1
    return SuiteReport("action containment", failures == 0, n, {"failures": failures})


def discretization_suite(t_values=(0.05, 0.1, 0.2, 0.5), substeps: int = 10_000) -> SuiteReport:
    worst = 0.0
    for t_c in t_values:
        model = discretize(t_c)
        F, G = rk4_transition(t_c, substeps)
        worst = max(worst, float(np.max(np.abs(model.F - F))), float(np.max(np.abs(model.G - G))))
    return SuiteReport("discretization", worst < 1e-8, len(t_values), {"max_abs_err": worst})


def brake_certificate(x: RobotState, region: ConvexRegion, params: MpcParams) -> bool:
    """True when a simple braking jerk sequence stays in the region and limits."""
    lim = params.limits
    model = discretize(params.t_c)
    s = x.as_array()
    for _ in range(params.N):
        v, a = s[2:4], s[4:6]
        a_des = np.clip(-v / params.t_c, -lim.a_max, lim.a_max)
        j = np.clip((a_des - a) / params.t_c, -lim.j_max, lim.j_max)
        s = model.F @ s + model.G @ j
        if not point_in_convex(region, s[0:2]):
            return False
        if np.any(np.abs(s[2:4]) > lim.v_max) or np.any(np.abs(s[4:6]) > lim.a_max):
            return False
    return True


def random_feasible_problem(rng: np.random.Generator, params: MpcParams) -> MpcProblem:
    lim = params.limits
    while True:
        region = random_region(rng)
        x = RobotState(
            0.0,
            0.0,
            *rng.uniform(-0.5 * lim.v_max, 0.5 * lim.v_max, 2),
            *rng.uniform(-0.5 * lim.a_max, 0.5 * lim.a_max, 2),
        )
        if not brake_certificate(x, region, params):
            continue
        r_s, r_l = reach_radii(params, math.hypot(x.vx, x.vy))
        refs = decode(RawAction.from_array(rng.uniform(0.0, 1.0, 4)), region, (0.0, 0.0), r_s, r_l)
        return MpcProblem(x, refs.q_short, refs.q_long, region, bool(rng.random() < 0.3))


def check_solution(problem: MpcProblem, sol, params: MpcParams, tol: float = 1e-6) -> bool:
    lim = params.limits
    inside = points_in_convex(problem.region, sol.q_star, tol).all()
    pred = sol.predicted
    box = (
        np.all(np.abs(sol.u_star) <= lim.j_max + tol)
        and np.all(np.abs(pred[:, 2:4]) <= lim.v_max + tol)
        and np.all(np.abs(pred[:, 4:6]) <= lim.a_max + tol)
    )
    return bool(inside and box)


def mpc_suite(n: int = 500, seed: int = 2, params: MpcParams | None = None) -> SuiteReport:
    params = params or MpcParams()
    rng = np.random.default_rng(seed)
    ctl = MpcController(params)
    problems = [random_feasible_problem(rng, params) for _ in range(n)]
    failures = 0
    times = []
    statuses: dict[str, int] = {}
    for prob in problems:
        t0 = time.perf_counter()
        sol = ctl.solve(prob)
        times.append(time.perf_counter() - t0)
        statuses[sol.status.value] = statuses.get(sol.status.value, 0) + 1
        if sol.status != MpcStatus.OPTIMAL or not check_solution(prob, sol, params):
            failures += 1
    median_ms = float(np.median(times) * 1e3)
    return SuiteReport(
        "mpc constraints",
        failures == 0 and median_ms < 5.0,
        n,
        {"failures": failures, "median_ms": median_ms, "max_ms": float(np.max(times) * 1e3), "statuses": statuses},
    )


def random_box_qp(rng: np.random.Generator, n: int = 6) -> tuple[QuadraticProgram, np.ndarray, np.ndarray]:
    M = rng.normal(size=(n, n))
    P = M @ M.T + 0.1 * np.eye(n)
    q = rng.normal(scale=3.0, size=n)
    lo = -rng.uniform(0.1, 1.0, n)
    hi = rng.uniform(0.1, 1.0, n)
    A = np.vstack((np.eye(n), -np.eye(n)))
    b = np.concatenate((hi, -lo))
    return QuadraticProgram(P, q, A, b), lo, hi


def qp_oracle_suite(n: int = 100, seed: int = 3) -> SuiteReport:
    rng = np.random.default_rng(seed)
    solver = AdmmSolver()
    worst = 0.0
    failures = 0
    for _ in range(n):
        qp, lo, hi = random_box_qp(rng)
        res = solver.solve(qp)
        ref = projected_gradient_box_qp(qp.P, qp.q, lo, hi)
        gap = abs(res.objective - qp.objective(ref))
        worst = max(worst, gap)
        if res.status != QpStatus.OPTIMAL or gap > 1e-5:
            failures += 1
    return SuiteReport("qp vs projected gradient", failures == 0, n, {"max_objective_gap": worst})


STOP_WEIGHT = 100.0


def stop_cost_scenario(params: MpcParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Terminal (|V_N|, |A_N|) with and without the stop cost on a fixed approach.

    The robot heads at 2 m/s toward a goal 3 m ahead inside a wide square
    region; both references sit on the goal and the stop weights are large.
    """
    params = params or replace(MpcParams(), w_vend=STOP_WEIGHT, w_aend=STOP_WEIGHT)
    region = ConvexRegion(_square(6.0), np.zeros(2))
    x = RobotState(0.0, 0.0, 2.0, 0.0, 0.0, 0.0)
    goal = np.array([3.0, 0.0])
    ctl = MpcController(params)
    out = []
    for flag in (True, False):
        sol = ctl.solve(MpcProblem(x, goal, goal, region, flag))
        term = sol.predicted[-1]
        out.append((math.hypot(term[2], term[3]), math.hypot(term[4], term[5])))
    return np.array(out[0]), np.array(out[1])


def _square(half: float) -> np.ndarray:
    return np.array([[-half, half], [half, half], [half, -half], [-half, -half]], dtype=float)


def stop_cost_suite(params: MpcParams | None = None) -> SuiteReport:
    with_stop, without = stop_cost_scenario(params)
    ratios = without / np.maximum(with_stop, 1e-12)
    return SuiteReport(
        "stop cost",
        bool(np.all(ratios >= 20.0)),
        1,
        {"v_ratio": float(ratios[0]), "a_ratio": float(ratios[1]), "v_on": float(with_stop[0]), "v_off": float(without[0])},
    )


def lidar_suite(n_worlds: int = 1000, seed: int = 4, beams_per_world: int = 4, tol: float = 2e-3) -> SuiteReport:
    """Analytic raycast against a 1 mm marching oracle on random stage worlds."""
    rng = np.random.default_rng(seed)
    config = EnvConfig()
    worst = 0.0
    failures = 0
    n_beams = config.n_beams
    for k in range(n_worlds):
        stage = int(rng.integers(1, 8))
        world = generate_scenario(STAGES[stage], int(rng.integers(0, 10**9)), config)
        ranges = raycast(world, world.robot.position, n_beams, config.lidar_range)
        for beam in rng.choice(n_beams, beams_per_world, replace=False):
            theta = 2.0 * math.pi * beam / n_beams
            ref = marching_range(world, world.robot.position, theta, config.lidar_range)
            err = abs(ref - ranges[beam])
            worst = max(worst, err)
            failures += err > tol
    return SuiteReport("lidar vs marching", failures == 0, n_worlds * beams_per_world, {"max_abs_err": worst})


def containment_agreement_suite(n: int = 10_000, seed: int = 5) -> SuiteReport:
    rng = np.random.default_rng(seed)
    regions = [random_region(rng) for _ in range(20)]
    mismatches = 0
    for k in range(n):
        region = regions[k % len(regions)]
        q = rng.uniform(-7.0, 7.0, 2)
        mismatches += point_in_convex(region, q) != brute_force_in_convex(region.vertices, q)
    return SuiteReport("point_in_convex vs brute force", mismatches == 0, n, {"mismatches": mismatches})
