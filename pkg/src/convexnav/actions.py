"""Decode policy outputs into short- and long-term reference points.

Both points are sampled inside the intersection of the convex region and a
kinematic reach disc centred on the robot, so they are collision-free by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import StartOutsideRegion
from .geom import ConvexRegion, TWO_PI, point_in_convex, ray_exit_distance, ray_polygon_distance, strictly_inside
from .mpc import MpcParams


@dataclass(frozen=True)
class RawAction:
    alpha_s: float
    beta_s: float
    alpha_l: float
    beta_l: float

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_s, self.beta_s, self.alpha_l, self.beta_l])

    @classmethod
    def from_array(cls, a) -> "RawAction":
        a = np.asarray(a, dtype=float).reshape(4)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class ReferencePoints:
    q_short: np.ndarray
    q_long: np.ndarray
    theta_s: float
    theta_l: float
    d_s: float
    d_l: float
    goal_in_convex: bool = False

    def to_dict(self) -> dict:
        return {
            "q_short": [float(v) for v in self.q_short],
            "q_long": [float(v) for v in self.q_long],
            "theta_s": self.theta_s,
            "theta_l": self.theta_l,
            "d_s": self.d_s,
            "d_l": self.d_l,
            "goal_in_convex": self.goal_in_convex,
        }


def reach_radii(params: MpcParams, speed: float = 0.0) -> tuple[float, float]:
    """Reachable offsets after one control period and after the full horizon.

    ``r = min(v_max, |v| + a_max * t) * t`` for ``t = t_c`` and ``t = N * t_c``.
    """
    lim = params.limits
    v = abs(float(speed))
    r_s = min(lim.v_max, v + lim.a_max * params.t_c) * params.t_c
    r_l = min(lim.v_max, v + lim.a_max * params.horizon) * params.horizon
    return r_s, r_l


def _circle_exit(start: np.ndarray, direction: np.ndarray, center: np.ndarray, radius: float) -> float:
    w = start - center
    b = float(direction @ w)
    c = float(w @ w) - radius * radius
    disc = b * b - c
    if disc <= 0.0:
        return 0.0
    return max(0.0, -b + math.sqrt(disc))


def decode(
    raw: RawAction,
    region: ConvexRegion,
    origin,
    r_s: float,
    r_l: float,
) -> ReferencePoints:
    o = np.asarray(origin, dtype=float)
    if not strictly_inside(region, o):
        raise StartOutsideRegion("robot position is not strictly inside the convex region")
    beta_s = min(max(raw.beta_s, 0.0), 1.0)
    beta_l = min(max(raw.beta_l, 0.0), 1.0)

    theta_s = raw.alpha_s * TWO_PI
    _, ray_s = ray_polygon_distance(region, o, theta_s)
    d_s = beta_s * min(ray_s, r_s)
    q_short = o + d_s * np.array([math.cos(theta_s), math.sin(theta_s)])

    theta_l = theta_s + raw.alpha_l * TWO_PI
    u_l = np.array([math.cos(theta_l), math.sin(theta_l)])
    ray_l = ray_exit_distance(region, q_short, theta_l)
    disc_l = _circle_exit(q_short, u_l, o, r_l)
    d_l = beta_l * min(ray_l, disc_l)
    q_long = q_short + d_l * u_l
    return ReferencePoints(q_short, q_long, float(theta_s), float(theta_l), float(d_s), float(d_l))


def goal_shortcut(region: ConvexRegion, goal, decoded: ReferencePoints) -> ReferencePoints:
    """Use the goal itself as the long-term point once it is inside the region."""
    g = np.asarray(goal, dtype=float)
    if point_in_convex(region, g):
        return replace(decoded, q_long=g.copy(), goal_in_convex=True)
    return decoded
