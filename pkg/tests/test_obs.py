import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.bench import random_region
from convexnav.dynamics import RobotState
from convexnav.obs import FrameStack, compose_observation, frame_size, heading_error, state_size

angle = st.floats(-math.pi, math.pi)


@pytest.mark.parametrize("rnum_v,frame,stacked", [(8, 27, 81), (16, 43, 129), (32, 75, 225)])
def test_dimensions(rnum_v, frame, stacked):
    assert frame_size(rnum_v) == frame == 2 * rnum_v + 11
    assert state_size(rnum_v) == stacked == 6 * rnum_v + 33
    rng = np.random.default_rng(rnum_v)
    from convexnav.geom import normalize_vertex_count

    region = normalize_vertex_count(random_region(rng), rnum_v)
    obs = compose_observation(RobotState(), (3.0, 4.0), region)
    assert obs.flatten().shape == (frame,)
    hist = FrameStack()
    assert hist.reset(obs).flatten().shape == (stacked,)


def test_basic_fields():
    region = random_region(np.random.default_rng(0))
    obs = compose_observation(RobotState(vx=1.0), (3.0, 4.0), region)
    assert obs.d == pytest.approx(5.0)
    assert obs.v == pytest.approx(1.0)
    assert obs.dtheta == pytest.approx(math.atan2(4.0, 3.0))


def test_parallel_motion_and_rest():
    assert heading_error(np.array([1.0, 1.0]), np.array([2.0, 2.0])) == pytest.approx(0.0)
    assert heading_error(np.array([0.0, 0.0]), np.array([2.0, 2.0])) == 0.0
    assert heading_error(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(math.pi)


@given(angle, angle)
def test_heading_error_is_signed_difference(a, b):
    err = heading_error(np.array([math.cos(a), math.sin(a)]), np.array([math.cos(b), math.sin(b)]))
    diff = (b - a + math.pi) % (2 * math.pi) - math.pi
    assert -math.pi < err <= math.pi
    assert math.cos(err - diff) == pytest.approx(1.0, abs=1e-9)


def test_missing_previous_points_are_zero():
    obs = compose_observation(RobotState(2, 3), (5, 5), random_region(np.random.default_rng(1)).translated((2, 3)))
    for field in (obs.q_short_prev, obs.q_long_prev, obs.q1_star, obs.qN_star):
        assert np.array_equal(field, np.zeros(2))


def test_previous_points_relative_to_decision_position():
    region = random_region(np.random.default_rng(2))
    robot = RobotState(1.0, 0.0, 1.0, 0.0)
    obs = compose_observation(robot, (5, 0), region.translated((1, 0)), (0.5, 0), (3, 0), (1, 0), (2.5, 0), prev_origin=(0, 0))
    assert np.allclose(obs.q1_star, (1.0, 0.0))
    assert np.allclose(obs.q_long_prev, (3.0, 0.0))


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_translation_invariance(dx, dy):
    region = random_region(np.random.default_rng(3))
    robot = RobotState(0.2, -0.1, 0.5, 0.3, 0.1, 0.0)
    pts = [np.array(p) for p in ((0.3, 0.1), (2.0, 1.0), (0.25, -0.05), (1.8, 0.9))]
    a = compose_observation(robot, (4.0, 2.0), region, *pts, prev_origin=(0.0, 0.0))
    off = np.array([dx, dy])
    moved = RobotState(robot.px + dx, robot.py + dy, robot.vx, robot.vy, robot.ax, robot.ay)
    b = compose_observation(moved, off + (4.0, 2.0), region.translated(off), *(p + off for p in pts), prev_origin=off)
    assert np.allclose(a.flatten(), b.flatten(), atol=1e-9)


def test_frame_stack_fill_and_slide():
    region = random_region(np.random.default_rng(4))
    frames = [compose_observation(RobotState(vx=float(k)), (5, 0), region) for k in range(4)]
    hist = FrameStack()
    s0 = hist.reset(frames[0])
    assert [f.v for f in s0.frames] == [0, 0, 0]
    assert [f.v for f in hist.push(frames[1]).frames] == [0, 0, 1]
    assert [f.v for f in hist.push(frames[2]).frames] == [0, 1, 2]
    assert [f.v for f in hist.push(frames[3]).frames] == [1, 2, 3]
