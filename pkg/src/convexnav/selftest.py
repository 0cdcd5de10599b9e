"""Hand-derived and oracle checks that run in a few seconds.

Each check returns a ``SuiteReport``; ``run_selftest`` runs them all.  The
randomized suites run here at reduced size; the CLI benchmarks and the
acceptance tests run them at full size.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import bench
from .actions import RawAction, decode, reach_radii
from .dynamics import Jerk, RobotState, discretize, step
from .geom import (
    ConvexRegion,
    build_convex_region,
    normalize_vertex_count,
    point_in_convex,
    ray_exit_distance,
    regular_polygon,
    strictly_inside,
)
from .harness import EpisodeResult, compute_metrics, episode_abs_acc
from .mpc import MpcController, MpcParams, MpcProblem, assemble_qp, prediction_matrices
from .oracles import (
    bisection_ray_distance,
    brute_force_gae,
    brute_force_in_convex,
    central_difference,
    max_relative_error,
    min_norm_tracking_jerks,
    squashed_mass,
)
from .ppo import Batch, PolicyNet, ValueNet, gae, policy_loss_and_grads, squashed_log_prob, value_loss_and_grads
from .reward import VARIANTS, RewardConfig, StepContext, compute_reward, obstacle_term, select_config

Report = bench.SuiteReport


def check_single_point_region() -> Report:
    region = build_convex_region(np.array([[2.0, 0.0]]), (0.0, 0.0), 5.0, 24)
    ok = (
        not strictly_inside(region, (2.0, 0.0))
        and brute_force_in_convex(region.vertices, (0.0, 0.0))
        and not brute_force_in_convex(region.vertices, (2.0 + 1e-6, 0.0))
        and float(np.max(region.vertices[:, 0])) <= 2.0 + 1e-9
    )
    return Report("single-point clip", ok, 1)


def check_normalize_20gon() -> Report:
    src = ConvexRegion(regular_polygon((0.0, 0.0), 3.0, 20), np.zeros(2))
    out = normalize_vertex_count(src, 16)
    ok = len(out.vertices) == 16 and all(point_in_convex(src, v) for v in out.vertices)
    return Report("20-gon to 16 vertices", ok, 1)


def check_ray_bisection(n: int = 200, seed: int = 11) -> Report:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        region = bench.random_region(rng)
        start = rng.uniform(-0.3, 0.3, 2)
        if not point_in_convex(region, start):
            start = np.zeros(2)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        got = ray_exit_distance(region, start, theta)
        ref = bisection_ray_distance(region.vertices, start, theta)
        worst = max(worst, abs(got - ref))
    return Report("ray exit vs bisection", worst < 1e-6, n, {"max_abs_err": worst})


def check_unit_step_blocks() -> Report:
    model = discretize(1.0)
    F = np.array([[1.0, 1.0, 0.5], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    G = np.array([1 / 6, 0.5, 1.0])
    x = step(RobotState(0, 0, 0, 0, 0, 0), Jerk(6.0, 0.0), model)
    ok = (
        np.allclose(model.F[0::2, 0::2], F, atol=1e-12)
        and np.allclose(model.G[0::2, 0], G, atol=1e-12)
        and np.allclose([x.px, x.vx, x.ax], [1.0, 3.0, 6.0], atol=1e-12)
    )
    return Report("unit-step blocks", ok, 2)


def check_qp_dimensions() -> Report:
    params = replace(MpcParams(), N=2)
    region = ConvexRegion(regular_polygon((0.0, 0.0), 2.0, 4), np.zeros(2))
    qp = assemble_qp(MpcProblem(RobotState(0, 0, 0, 0, 0, 0), (0.1, 0), (0.5, 0), region, False), params)
    n_rows = qp.A.shape[0]
    ok = qp.P.shape == (4, 4) and n_rows == 8 + 24
    return Report("QP row count N=2 rnum_v=4", ok, 1, {"rows": n_rows})


def loose_params() -> MpcParams:
    base = MpcParams()
    return replace(base, limits=replace(base.limits, v_max=100.0, a_max=100.0, j_max=1000.0))


def huge_region() -> ConvexRegion:
    return ConvexRegion(regular_polygon((0.0, 0.0), 1000.0, 16), np.zeros(2))


def tracking_gaps() -> tuple[float, float, float]:
    """Solver vs closed-form optimum, and terminal gaps at rest and cruising.

    From rest the jerk penalty alone leaves a few millimetres of terminal
    error at default weights.  A robot already cruising at 0.5 m/s toward a
    target 1 m ahead reaches it with zero jerk, so the closed-form
    minimum-norm solution is exact and the solver must match it.
    """
    params = loose_params()
    region = huge_region()
    ctl = MpcController(params)
    rest = RobotState(0, 0, 0, 0, 0, 0)
    q_short, q_long = np.array([0.01, 0.0]), np.array([1.0, 0.0])
    problem = MpcProblem(rest, q_short, q_long, region, False)
    qp = assemble_qp(problem, params)
    z_ls = np.linalg.solve(qp.P, -qp.q)
    sol = ctl.solve(problem)
    solver_gap = float(np.max(np.abs(sol.u_star.reshape(-1) - z_ls)))
    rest_gap = float(np.linalg.norm(sol.q_star[-1] - q_long))

    cruise = RobotState(0, 0, 0.5, 0, 0, 0)
    pred = prediction_matrices(params.N, params.t_c)
    q_s = np.array([0.1, 0.0])
    u_ref = min_norm_tracking_jerks(pred.Sx, pred.Su, cruise.as_array(), q_s, q_long)
    sol = ctl.solve(MpcProblem(cruise, q_s, q_long, region, False))
    cruise_gap = max(float(np.linalg.norm(sol.q_star[-1] - q_long)), float(np.max(np.abs(sol.u_star.reshape(-1) - u_ref))))
    return solver_gap, rest_gap, cruise_gap


def check_min_norm_tracking() -> Report:
    solver_gap, rest_gap, cruise_gap = tracking_gaps()
    ok = solver_gap < 1e-6 and cruise_gap < 1e-3
    return Report("tracking dominates", ok, 2, {"vs_closed_form": solver_gap, "cruise_gap": cruise_gap, "rest_gap": rest_gap})


def check_reach_radii() -> Report:
    r_s, r_l = reach_radii(MpcParams(), 0.0)
    ok = abs(r_s - 0.12) < 1e-12 and abs(r_l - 6.0) < 1e-12
    return Report("reach radii at rest", ok, 2, {"r_s": r_s, "r_l": r_l})


def check_decode_axis() -> Report:
    square = ConvexRegion(np.array([[-2.0, 2.0], [2.0, 2.0], [2.0, -2.0], [-2.0, -2.0]]), np.zeros(2))
    refs = decode(RawAction(0.0, 1.0 - 1e-12, 0.0, 0.0), square, (0.0, 0.0), 0.5, 6.0)
    ok = np.allclose(refs.q_short, [0.5, 0.0], atol=1e-6)
    return Report("decode along +x", ok, 1)


def check_reward_cases() -> Report:
    cfg = RewardConfig()
    o_term = obstacle_term(2.0, replace(cfg, w_obs=1.0))
    zero = np.zeros(2)
    ctx = StepContext(d_t=0.1, d_prev=0.1, clearance=100.0, t=1, q_short=zero, q_long=zero,
                      q_short_prev=zero, q_long_prev=zero, q1_star=zero, qN_star=zero)
    total = compute_reward(ctx, cfg).total
    ok = abs(o_term - (-2.0 * math.exp(-2.0))) < 1e-12 and abs(total - 19.95) < 1e-12
    return Report("reward hand cases", ok, 2, {"o_term": o_term, "total": total})


def check_reward_identity(n: int = 1000, seed: int = 12) -> Report:
    rng = np.random.default_rng(seed)
    variants = {v: select_config(v) for v in VARIANTS}
    worst = 0.0
    for _ in range(n):
        pts = rng.normal(0.0, 2.0, (6, 2))
        ctx = StepContext(
            d_t=float(rng.uniform(0, 10)), d_prev=float(rng.uniform(0, 10)), clearance=float(rng.uniform(-0.5, 4)),
            t=int(rng.integers(1, 150)), q_short=pts[0], q_long=pts[1], q_short_prev=pts[2],
            q_long_prev=pts[3], q1_star=pts[4], qN_star=pts[5],
        )
        b = {v: compute_reward(ctx, c) for v, c in variants.items()}
        gap = b["rt1"].total - b["rt4"].total - (b["rt1"].c + b["rt1"].f)
        worst = max(worst, abs(gap))
    return Report("rt1 - rt4 = change + feasibility", worst < 1e-9, n, {"max_abs_err": worst})


def check_policy_mean(n: int = 100_000, seed: int = 13) -> Report:
    rng = np.random.default_rng(seed)
    policy = PolicyNet(5, rng, hidden=(8,), init_log_std=-0.5)
    x = rng.normal(size=(1, 5))
    mu = policy.mean(x)[0]
    z = mu + policy.std() * rng.standard_normal((n, policy.n_actions))
    se = policy.std() / math.sqrt(n)
    dev = np.abs(z.mean(axis=0) - mu) / se
    return Report("sample mean within 3 SE", bool(np.all(dev < 3.0)), n, {"max_se": float(dev.max())})


def check_squashed_quadrature() -> Report:
    mu, log_std = np.array([0.4]), np.array([-0.3])

    def density(a):
        z = np.log(a) - np.log1p(-a)
        return squashed_log_prob(z[:, None], mu, log_std)

    mass = squashed_mass(density)
    return Report("squashed density integrates to 1", abs(mass - 1.0) < 1e-3, 1, {"mass": mass})


def check_gae(n: int = 50, seed: int = 14) -> Report:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        T = int(rng.integers(1, 40))
        r, v = rng.normal(size=T), rng.normal(size=T)
        d = rng.random(T) < 0.15
        last = float(rng.normal())
        adv, ret = gae(r, v, d, 0.99, 0.95, last)
        adv_ref, ret_ref = brute_force_gae(r, v, d, 0.99, 0.95, last)
        worst = max(worst, float(np.max(np.abs(adv - adv_ref))), float(np.max(np.abs(ret - ret_ref))))
    return Report("GAE vs discounted sums", worst < 1e-10, n, {"max_abs_err": worst})


def toy_batch(input_dim: int, rng: np.random.Generator, n: int = 6) -> Batch:
    states = rng.normal(size=(n, input_dim))
    z = rng.normal(size=(n, 4))
    return Batch(states, z, rng.normal(-2.0, 0.3, n), rng.normal(size=n), rng.normal(size=n))


def gradient_errors(seed: int = 15) -> tuple[float, float]:
    """Max relative error of analytic vs central-difference gradients."""
    rng = np.random.default_rng(seed)
    policy = PolicyNet(3, rng, hidden=(2,), init_log_std=-0.2)
    value = ValueNet(3, rng, hidden=(2,))
    batch = toy_batch(3, rng)
    # clip range wide enough that no sample sits on a clip kink
    _, g_pol, _ = policy_loss_and_grads(policy, batch, 10.0, 0.01)
    fd_pol = central_difference(lambda: policy_loss_and_grads(policy, batch, 10.0, 0.01)[0], policy.params)
    _, g_val = value_loss_and_grads(value, batch)
    fd_val = central_difference(lambda: value_loss_and_grads(value, batch)[0], value.params)
    return max_relative_error(g_pol, fd_pol), max_relative_error(g_val, fd_val)


def check_gradients() -> Report:
    e_pol, e_val = gradient_errors()
    return Report("network gradients vs finite differences", max(e_pol, e_val) < 1e-4, 2, {"policy": e_pol, "value": e_val})


def check_abs_acc_metric() -> Report:
    acc = episode_abs_acc(np.ones((10, 2)))
    res = EpisodeResult(0, 1, True, False, False, 10, 2.0, 1.0, 0.5, acc, 0.0)
    m = compute_metrics([res])
    return Report("abs acc Euclidean sum", abs(m.total_abs_acc - 10 * math.sqrt(2)) < 1e-12, 1, {"value": m.total_abs_acc})


CHECKS = (
    check_single_point_region,
    check_normalize_20gon,
    check_ray_bisection,
    check_unit_step_blocks,
    check_qp_dimensions,
    check_min_norm_tracking,
    check_reach_radii,
    check_decode_axis,
    check_reward_cases,
    check_reward_identity,
    check_policy_mean,
    check_squashed_quadrature,
    check_gae,
    check_gradients,
    check_abs_acc_metric,
)


def run_selftest(quick: bool = True) -> list[Report]:
    scale = 10 if quick else 1
    reports = [c() for c in CHECKS]
    reports += [
        bench.geometry_suite(n=200 if quick else 10_000),
        bench.action_suite(n=10_000 // scale),
        bench.discretization_suite(),
        bench.mpc_suite(n=500 // scale),
        bench.qp_oracle_suite(n=100 // scale),
        bench.stop_cost_suite(),
        bench.lidar_suite(n_worlds=1000 // scale),
        bench.containment_agreement_suite(n=10_000 // scale),
    ]
    return reports
