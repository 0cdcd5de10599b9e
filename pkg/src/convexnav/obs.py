"""Per-frame observations and the three-frame stacked state.

A frame holds the normalised region, goal distance, speed, heading error and
the previous reference / MPC points, all relative to the robot position with
axes aligned to the world.  Flattened layout (length ``2 * rnum_v + 11``)::

    convex (x0, y0, x1, y1, ...), d, v, dtheta,
    q_short_prev, q_long_prev, q1_star, qN_star
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import RobotState
from .geom import ConvexRegion

N_FRAMES = 3
STATIONARY_SPEED = 1e-6


def frame_size(rnum_v: int) -> int:
    return 2 * rnum_v + 11


def state_size(rnum_v: int) -> int:
    return N_FRAMES * frame_size(rnum_v)


@dataclass(frozen=True)
class Observation:
    convex: np.ndarray
    d: float
    v: float
    dtheta: float
    q_short_prev: np.ndarray
    q_long_prev: np.ndarray
    q1_star: np.ndarray
    qN_star: np.ndarray

    @property
    def rnum_v(self) -> int:
        return int(self.convex.shape[0])

    def flatten(self) -> np.ndarray:
        return np.concatenate(
            (
                self.convex.reshape(-1),
                (self.d, self.v, self.dtheta),
                self.q_short_prev,
                self.q_long_prev,
                self.q1_star,
                self.qN_star,
            )
        )


@dataclass(frozen=True)
class StackedState:
    frames: tuple[Observation, Observation, Observation]

    def flatten(self) -> np.ndarray:
        return np.concatenate([f.flatten() for f in self.frames])


def heading_error(velocity: np.ndarray, to_goal: np.ndarray) -> float:
    """Signed angle from the velocity direction to the goal direction, in (-pi, pi]."""
    vx, vy = float(velocity[0]), float(velocity[1])
    if math.hypot(vx, vy) < STATIONARY_SPEED:
        return 0.0
    gx, gy = float(to_goal[0]), float(to_goal[1])
    if gx == 0.0 and gy == 0.0:
        return 0.0
    ang = math.atan2(vx * gy - vy * gx, vx * gx + vy * gy)
    return math.pi if ang == -math.pi else ang


def compose_observation(
    robot: RobotState,
    goal,
    region: ConvexRegion,
    q_short_prev=None,
    q_long_prev=None,
    q1_star=None,
    qN_star=None,
    prev_origin=None,
) -> Observation:
    """Build one frame; every point input shares the frame of ``robot``.

    The four previous-step points are expressed relative to ``prev_origin``,
    the robot position where that decision was made (default: the current
    position).  This keeps the last displacement, and hence the direction of
    travel, visible in ``q1_star``.  Missing points map to zero.
    """
    p = robot.position
    to_goal = np.asarray(goal, dtype=float) - p
    base = p if prev_origin is None else np.asarray(prev_origin, dtype=float)

    def rel(q):
        return np.zeros(2) if q is None else np.asarray(q, dtype=float) - base

    return Observation(
        convex=region.vertices - p,
        d=float(math.hypot(to_goal[0], to_goal[1])),
        v=float(math.hypot(robot.vx, robot.vy)),
        dtheta=heading_error(robot.velocity, to_goal),
        q_short_prev=rel(q_short_prev),
        q_long_prev=rel(q_long_prev),
        q1_star=rel(q1_star),
        qN_star=rel(qN_star),
    )


class FrameStack:
    """Sliding window of the last three frames, front-filled at episode start."""

    def __init__(self) -> None:
        self._frames: deque[Observation] = deque(maxlen=N_FRAMES)

    def reset(self, first: Observation) -> StackedState:
        self._frames.clear()
        for _ in range(N_FRAMES):
            self._frames.append(first)
        return self.state()

    def push(self, obs: Observation) -> StackedState:
        if not self._frames:
            return self.reset(obs)
        self._frames.append(obs)
        return self.state()

    def state(self) -> StackedState:
        return StackedState(tuple(self._frames))


def stack(history: FrameStack, obs: Observation) -> StackedState:
    return history.push(obs)


def input_scale(
    rnum_v: int, lidar_range: float, arena_diag: float, v_max: float, short_reach: float, long_reach: float
) -> np.ndarray:
    """Divisors mapping a flattened stacked state to roughly unit range.

    Previous-step points are scaled by the reach they were drawn from, so the
    last displacement (and with it the direction of travel) is not swamped.
    """
    frame = np.concatenate(
        (
            np.full(2 * rnum_v, lidar_range),
            (arena_diag, v_max, math.pi),
            np.full(2, short_reach),
            np.full(2, long_reach),
            np.full(2, short_reach),
            np.full(2, long_reach),
        )
    )
    return np.tile(frame, N_FRAMES)
