import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.dynamics import Jerk, Limits, RobotState, discretize, step, step_array
from convexnav.errors import NonPositiveStep
from convexnav.oracles import rk4_transition

finite = st.floats(-5.0, 5.0, allow_nan=False)


def test_unit_step_blocks():
    model = discretize(1.0)
    assert np.allclose(model.F[0::2, 0::2], [[1, 1, 0.5], [0, 1, 1], [0, 0, 1]], atol=0)
    assert np.allclose(model.G[0::2, 0], [1 / 6, 0.5, 1.0], atol=0)
    # axes do not mix
    assert np.all(model.F[0::2, 1::2] == 0) and np.all(model.G[0::2, 1] == 0)


def test_constant_jerk_from_rest_closed_form():
    x = step(RobotState(), Jerk(6.0, 0.0), discretize(1.0))
    assert (x.px, x.vx, x.ax) == pytest.approx((1.0, 3.0, 6.0), abs=1e-12)
    assert (x.py, x.vy, x.ay) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("t_c", [0.05, 0.1, 0.2, 0.5])
def test_matches_fine_step_ode(t_c):
    model = discretize(t_c)
    F, G = rk4_transition(t_c, 10_000)
    assert np.max(np.abs(model.F - F)) < 1e-8
    assert np.max(np.abs(model.G - G)) < 1e-8


@pytest.mark.parametrize("bad", [0.0, -0.1])
def test_rejects_nonpositive_step(bad):
    with pytest.raises(NonPositiveStep):
        discretize(bad)


@given(st.lists(finite, min_size=6, max_size=6), finite, finite, st.floats(0.01, 1.0))
def test_two_half_steps_equal_one_full_step(x, jx, jy, t_c):
    x0 = np.array(x)
    u = np.array([jx, jy])
    full = step_array(x0, u, discretize(t_c))
    half = discretize(t_c / 2)
    twice = step_array(step_array(x0, u, half), u, half)
    assert np.allclose(full, twice, atol=1e-9)


@given(st.lists(finite, min_size=6, max_size=6), st.lists(finite, min_size=6, max_size=6), finite, finite)
def test_linearity(x, y, jx, jy):
    model = discretize(0.2)
    a, b = np.array(x), np.array(y)
    u = np.array([jx, jy])
    lhs = step_array(a + b, u, model)
    rhs = step_array(a, u, model) + step_array(b, np.zeros(2), model)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_state_roundtrip_and_limits():
    s = RobotState(1, 2, 3, -3, 0.5, -0.5)
    assert RobotState.from_array(s.as_array()) == s
    assert s.within(Limits())
    assert not RobotState(vx=3.1).within(Limits())
