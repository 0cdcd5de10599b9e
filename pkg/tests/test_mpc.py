from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.bench import check_solution, random_box_qp, random_feasible_problem, stop_cost_scenario
from convexnav.dynamics import RobotState, step_array
from convexnav.errors import StartOutsideRegion
from convexnav.geom import ConvexRegion, regular_polygon
from convexnav.mpc import (
    MpcController,
    MpcParams,
    MpcProblem,
    MpcStatus,
    assemble_qp,
    prediction_matrices,
    solve_mpc,
)
from convexnav.oracles import min_norm_tracking_jerks, projected_gradient_box_qp
from convexnav.qp import AdmmSolver, QpStatus, QuadraticProgram, solve_qp
from convexnav.selftest import tracking_gaps


def square(half):
    return ConvexRegion(np.array([[-half, half], [half, half], [half, -half], [-half, -half]]), np.zeros(2))


# ---- QP solver -------------------------------------------------------------


def test_unconstrained_returns_target():
    c = np.array([1.0, -2.0, 0.5])
    qp = QuadraticProgram(2 * np.eye(3), -2 * c, np.zeros((0, 3)), np.zeros(0))
    x, status = solve_qp(qp)
    assert status == QpStatus.OPTIMAL
    assert np.allclose(x, c, atol=1e-9)


def test_infeasible_pair_is_reported():
    qp = QuadraticProgram(np.eye(1), np.zeros(1), np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    _, status = solve_qp(qp)
    assert status == QpStatus.INFEASIBLE


def test_box_qps_match_projected_gradient():
    rng = np.random.default_rng(0)
    for _ in range(100):
        qp, lo, hi = random_box_qp(rng)
        x, status = solve_qp(qp)
        ref = projected_gradient_box_qp(qp.P, qp.q, lo, hi)
        assert status == QpStatus.OPTIMAL
        assert abs(qp.objective(x) - qp.objective(ref)) < 1e-5


def test_solver_is_deterministic():
    qp, _, _ = random_box_qp(np.random.default_rng(1))
    a = AdmmSolver().solve(qp)
    b = AdmmSolver().solve(qp)
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


@given(st.integers(0, 10_000))
def test_fixed_point_residual_is_monotone(seed):
    qp, _, _ = random_box_qp(np.random.default_rng(seed))
    res = AdmmSolver(adaptive_rho=False, polish=False, record_residuals=True).solve(qp)
    hist = np.array(res.fixed_point_residuals)
    assert np.all(np.diff(hist) <= 1e-12 * (1 + hist[:-1]))


# ---- MPC assembly ----------------------------------------------------------


def test_row_counts_for_small_horizon():
    params = replace(MpcParams(), N=2)
    prob = MpcProblem(RobotState(), (0.1, 0.0), (0.5, 0.0), square(2.0), False)
    qp = assemble_qp(prob, params)
    assert qp.n_vars == 4
    sizes = {k: s.stop - s.start for k, s in qp.groups.items()}
    assert sizes == {"containment": 8, "jerk": 8, "velocity": 8, "acceleration": 8}


def test_stop_cost_only_changes_terminal_terms():
    params = MpcParams()
    base = MpcProblem(RobotState(vx=1.0), (0.1, 0.0), (2.0, 0.0), square(5.0), False)
    off = assemble_qp(base, params)
    on = assemble_qp(replace(base, goal_in_convex=True), params)
    pred = prediction_matrices(params.N, params.t_c)
    V, A = pred.Su[-1, 2:4], pred.Su[-1, 4:6]
    extra = 2 * params.w_vend * V.T @ V + 2 * params.w_aend * A.T @ A
    assert np.allclose(on.P - off.P, extra, atol=1e-9)
    assert np.array_equal(on.A, off.A)


def test_at_rest_on_reference_gives_zero():
    region = square(2.0)
    c = region.centroid
    sol = solve_mpc(MpcProblem(RobotState(*c), c, c, region, True))
    assert sol.status == MpcStatus.OPTIMAL
    assert np.allclose(sol.u_star, 0.0, atol=1e-7)
    assert abs(sol.objective) < 1e-9


def test_zero_smoothing_hits_both_references():
    params = replace(MpcParams(), w_smooth=0.0)
    prob = MpcProblem(RobotState(), (0.01, 0.0), (1.0, 0.5), square(50.0), False)
    sol = MpcController(params).solve(prob)
    assert np.allclose(sol.q_star[0], prob.q_short, atol=1e-4)
    assert np.allclose(sol.q_star[-1], prob.q_long, atol=1e-4)


def test_tracking_matches_closed_form():
    solver_gap, rest_gap, cruise_gap = tracking_gaps()
    assert solver_gap < 1e-6
    assert cruise_gap < 1e-3
    # the jerk penalty alone keeps the from-rest optimum a few millimetres short
    assert 1e-3 < rest_gap < 5e-3


def test_min_norm_oracle_hits_targets():
    params = MpcParams()
    pred = prediction_matrices(params.N, params.t_c)
    x0 = np.array([0, 0, 0.3, -0.2, 0, 0])
    u = min_norm_tracking_jerks(pred.Sx, pred.Su, x0, (0.1, 0.0), (1.0, 1.0))
    traj = pred.Sx @ x0 + pred.Su @ u
    assert np.allclose(traj[0, 0:2], (0.1, 0.0)) and np.allclose(traj[-1, 0:2], (1.0, 1.0))


def test_random_feasible_problems_are_satisfied():
    params = MpcParams()
    rng = np.random.default_rng(7)
    ctl = MpcController(params)
    for _ in range(100):
        prob = random_feasible_problem(rng, params)
        sol = ctl.solve(prob)
        assert sol.status == MpcStatus.OPTIMAL
        assert check_solution(prob, sol, params)


def test_predicted_states_follow_dynamics():
    params = MpcParams()
    prob = random_feasible_problem(np.random.default_rng(8), params)
    sol = solve_mpc(prob, params)
    model = prediction_matrices(params.N, params.t_c).model
    x = prob.x_init.as_array()
    for i in range(params.N):
        x = step_array(x, sol.u_star[i], model)
        assert np.allclose(x, sol.predicted[i], atol=1e-9)
    assert np.array_equal(sol.q_star, sol.predicted[:, 0:2])


def test_start_outside_region_raises():
    with pytest.raises(StartOutsideRegion):
        solve_mpc(MpcProblem(RobotState(5.0, 0.0), (0, 0), (0, 0), square(1.0), False))


def test_fast_robot_in_small_region_falls_back_softly():
    region = ConvexRegion(regular_polygon((0.0, 0.0), 0.3, 16), np.zeros(2))
    prob = MpcProblem(RobotState(vx=3.0, ax=3.0), (0.0, 0.0), (0.0, 0.0), region, True)
    sol = solve_mpc(prob)
    assert sol.status in (MpcStatus.SOFT_FALLBACK, MpcStatus.FAILED)
    assert np.all(np.isfinite(sol.u_star))


def test_stop_cost_shrinks_terminal_motion():
    with_stop, without = stop_cost_scenario()
    assert np.all(without / with_stop >= 20.0)


def test_solution_json_roundtrip_keys():
    sol = solve_mpc(random_feasible_problem(np.random.default_rng(9), MpcParams()))
    d = sol.to_dict()
    assert set(d) == {"u_star", "predicted", "q_star", "status", "objective", "iterations"}
