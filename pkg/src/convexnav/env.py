"""Deterministic 2D crowd-navigation world and the per-step control loop.

The robot is an omnidirectional disc driven by jerk commands.  Each step:
region from the current scan, decode the action, solve the MPC, apply the
first jerk over ``substeps`` sub-intervals while the movers advance, check
contact at every sub-interval, then scan again and score the step.

Perception, decoding and MPC all run in the robot-centred frame (world
axes, robot at the origin); the world keeps absolute coordinates only for
bookkeeping and traces.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .actions import RawAction, ReferencePoints, decode, goal_shortcut, reach_radii
from .dynamics import Jerk, RobotState, discretize
from .errors import PlacementFailed
from .geom import ConvexRegion, build_convex_region, erode_convex, half_planes, normalize_vertex_count, signed_area
from .mpc import MpcController, MpcParams, MpcProblem, MpcSolution, MpcStatus
from .obs import FrameStack, Observation, StackedState, compose_observation, input_scale, state_size
from .reward import RewardBreakdown, RewardConfig, StepContext, compute_reward, select_config

PLACEMENT_TRIES = 10_000


@dataclass(frozen=True)
class StageSpec:
    stage: int
    arena_w: float
    arena_h: float
    n_static: int
    n_dynamic: int
    dyn_radius_range: tuple[float, float] = (0.0, 0.0)
    dyn_speed_range: tuple[float, float] = (0.0, 0.0)

    @property
    def min_start_goal(self) -> float:
        return 8.0 if min(self.arena_w, self.arena_h) >= 20.0 else 4.0


STAGES: dict[int, StageSpec] = {
    1: StageSpec(1, 20.0, 30.0, 0, 0),
    2: StageSpec(2, 20.0, 30.0, 10, 0),
    3: StageSpec(3, 20.0, 30.0, 10, 5, (0.2, 0.3), (0.3, 0.3)),
    4: StageSpec(4, 20.0, 30.0, 10, 10, (0.2, 0.3), (0.3, 0.3)),
    5: StageSpec(5, 10.0, 10.0, 0, 10, (0.1, 0.4), (0.3, 0.6)),
    6: StageSpec(6, 10.0, 10.0, 0, 20, (0.1, 0.4), (0.3, 0.6)),
    7: StageSpec(7, 10.0, 10.0, 0, 30, (0.1, 0.4), (0.3, 0.6)),
}


def get_stage(stage: int | StageSpec) -> StageSpec:
    if isinstance(stage, StageSpec):
        return stage
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage}; stages are 1..7")
    return STAGES[stage]


# depth the robot keeps inside the planning region when erosion is capped
MIN_FREE_DEPTH = 1e-3


@dataclass(frozen=True)
class EnvConfig:
    robot_radius: float = 0.3
    n_beams: int = 360
    lidar_range: float = 8.0
    lidar_noise: float = 0.0
    seed_sides: int = 24
    rnum_v: int = 16
    max_steps: int = 150
    substeps: int = 10
    placement_margin: float = 0.2
    # extra erosion beyond the robot radius; absorbs solver tolerance and beam gaps
    safety_margin: float = 0.05
    static_area_max: float = 2.0
    mpc: MpcParams = field(default_factory=MpcParams)
    reward: RewardConfig = field(default_factory=RewardConfig)

    @property
    def t_c(self) -> float:
        return self.mpc.t_c

    @property
    def state_dim(self) -> int:
        return state_size(self.rnum_v)

    def with_reward_variant(self, variant: str) -> "EnvConfig":
        return replace(self, reward=select_config(variant, self.reward))


@dataclass
class World:
    arena_w: float
    arena_h: float
    static_polys: list[np.ndarray]
    dyn_pos: np.ndarray
    dyn_radius: np.ndarray
    dyn_speed: np.ndarray
    dyn_waypoint: np.ndarray
    robot: RobotState
    goal: np.ndarray
    rng: np.random.Generator
    stage: int = 0
    seed: int = 0
    step_count: int = 0
    speed_range: tuple[float, float] = (0.0, 0.0)

    def copy(self) -> "World":
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return World(
            self.arena_w,
            self.arena_h,
            [p.copy() for p in self.static_polys],
            self.dyn_pos.copy(),
            self.dyn_radius.copy(),
            self.dyn_speed.copy(),
            self.dyn_waypoint.copy(),
            self.robot,
            self.goal.copy(),
            rng,
            self.stage,
            self.seed,
            self.step_count,
            self.speed_range,
            self.origin_offset.copy(),
        )

    def layout_dict(self) -> dict:
        return {
            "arena": [self.arena_w, self.arena_h],
            "static": [p.tolist() for p in self.static_polys],
            "dynamic": [[*c, r] for c, r in zip(self.dyn_pos.tolist(), self.dyn_radius.tolist())],
            "robot": self.robot.as_array().tolist(),
            "goal": self.goal.tolist(),
            "stage": self.stage,
            "seed": self.seed,
        }

    def translated(self, offset) -> "World":
        off = np.asarray(offset, dtype=float)
        w = self.copy()
        w.static_polys = [p + off for p in w.static_polys]
        w.dyn_pos = w.dyn_pos + off
        w.dyn_waypoint = w.dyn_waypoint + off
        w.robot = w.robot.with_position(w.robot.px + off[0], w.robot.py + off[1])
        w.goal = w.goal + off
        w.origin_offset = w.origin_offset + off
        w.__dict__.pop("_seg_cache", None)
        return w

    origin_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def wall_segments(self) -> np.ndarray:
        x0, y0 = self.origin_offset
        x1, y1 = x0 + self.arena_w, y0 + self.arena_h
        c = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        return np.stack((c, np.roll(c, -1, axis=0)), axis=1)

    def segments(self) -> np.ndarray:
        """All wall and static-polygon edges, shape ``(k, 2, 2)``; cached."""
        key = (len(self.static_polys), float(self.origin_offset[0]), float(self.origin_offset[1]))
        cache = self.__dict__.get("_seg_cache")
        if cache is not None and cache[0] == key:
            return cache[1]
        segs = [self.wall_segments()]
        starts = []
        k = 4
        for poly in self.static_polys:
            segs.append(np.stack((poly, np.roll(poly, -1, axis=0)), axis=1))
            starts.append(k)
            k += len(poly)
        out = np.concatenate(segs, axis=0)
        self.__dict__["_seg_cache"] = (key, out, np.array(starts, dtype=int))
        return out

    def polygon_edge_starts(self) -> np.ndarray:
        """Row index in :meth:`segments` where each static polygon begins."""
        self.segments()
        return self.__dict__["_seg_cache"][2]


def make_world(
    arena_w: float,
    arena_h: float,
    start,
    goal,
    static_polys=(),
    discs=(),
    seed: int = 0,
    speed_range: tuple[float, float] = (0.0, 0.0),
) -> World:
    """Hand-built world; ``discs`` rows are ``(x, y, radius, speed, wx, wy)``."""
    d = np.asarray(discs, dtype=float).reshape(-1, 6)
    return World(
        float(arena_w),
        float(arena_h),
        [np.asarray(p, dtype=float) for p in static_polys],
        d[:, 0:2].copy(),
        d[:, 2].copy(),
        d[:, 3].copy(),
        d[:, 4:6].copy(),
        RobotState(float(start[0]), float(start[1])),
        np.asarray(goal, dtype=float),
        np.random.default_rng(seed),
        0,
        seed,
        0,
        speed_range,
    )


def _random_polygon(rng: np.random.Generator, center: np.ndarray, area_max: float) -> np.ndarray | None:
    k = int(rng.integers(3, 5))
    ang = np.sort(rng.uniform(0.0, 2.0 * math.pi, k))
    rad = rng.uniform(0.3, 1.2, k)
    poly = center + np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
    area = signed_area(poly)
    if area <= 0.05 or area > area_max:
        return None
    e = np.roll(poly, -1, axis=0) - poly
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if np.any(cross <= 0.0):
        return None
    return poly


def point_clearance(world: World, p: np.ndarray, dyn_pos: np.ndarray | None = None) -> float:
    """Distance from ``p`` to the nearest wall, polygon or disc surface (0 inside)."""
    segs = world.segments() - p
    a, b = segs[:, 0], segs[:, 1]
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    t = np.clip(-np.einsum("ij,ij->i", a, e) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    closest = a + t[:, None] * e
    best = float(np.min(np.hypot(closest[:, 0], closest[:, 1])))
    ox, oy = world.origin_offset
    if not (ox <= p[0] <= ox + world.arena_w and oy <= p[1] <= oy + world.arena_h):
        return 0.0
    starts = world.polygon_edge_starts()
    if len(starts):
        pa, pb = a[4:], b[4:]
        cross = pa[:, 0] * pb[:, 1] - pa[:, 1] * pb[:, 0]
        if np.any(np.minimum.reduceat(cross, starts - 4) >= 0.0):
            return 0.0
    pos = world.dyn_pos if dyn_pos is None else dyn_pos
    if len(pos):
        d = np.hypot(pos[:, 0] - p[0], pos[:, 1] - p[1]) - world.dyn_radius
        best = min(best, float(np.min(d)))
    return max(best, 0.0)


def generate_scenario(stage: int | StageSpec, seed: int, config: EnvConfig | None = None) -> World:
    """Random world for ``(stage, seed)``; identical inputs give identical worlds."""
    spec = get_stage(stage)
    config = config or EnvConfig()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), spec.stage]))
    W, H = spec.arena_w, spec.arena_h
    clear = config.robot_radius + config.placement_margin

    polys: list[np.ndarray] = []
    for _ in range(spec.n_static):
        for _ in range(PLACEMENT_TRIES):
            center = rng.uniform((1.0, 1.0), (W - 1.0, H - 1.0))
            poly = _random_polygon(rng, center, config.static_area_max)
            if poly is not None:
                polys.append(poly)
                break
        else:
            raise PlacementFailed(f"could not generate static obstacle for stage {spec.stage}")

    empty = np.zeros((0, 2))
    probe = World(W, H, polys, empty, np.zeros(0), np.zeros(0), empty, RobotState(), np.zeros(2), rng)

    def free_point() -> np.ndarray:
        for _ in range(PLACEMENT_TRIES):
            p = rng.uniform((clear, clear), (W - clear, H - clear))
            if point_clearance(probe, p) >= clear:
                return p
        raise PlacementFailed(f"no free start/goal position in stage {spec.stage}")

    start = free_point()
    for _ in range(PLACEMENT_TRIES):
        goal = free_point()
        if math.hypot(*(goal - start)) >= spec.min_start_goal:
            break
    else:
        raise PlacementFailed(f"no goal far enough from start in stage {spec.stage}")

    n = spec.n_dynamic
    dyn_pos = np.zeros((n, 2))
    dyn_radius = np.zeros(n)
    dyn_speed = np.zeros(n)
    dyn_wp = np.zeros((n, 2))
    for i in range(n):
        r = rng.uniform(*spec.dyn_radius_range)
        for _ in range(PLACEMENT_TRIES):
            c = rng.uniform((r, r), (W - r, H - r))
            if min(math.hypot(*(c - start)), math.hypot(*(c - goal))) >= r + clear:
                break
        else:
            raise PlacementFailed(f"could not place dynamic obstacle {i} in stage {spec.stage}")
        dyn_pos[i] = c
        dyn_radius[i] = r
        dyn_speed[i] = rng.uniform(*spec.dyn_speed_range)
        dyn_wp[i] = rng.uniform((r, r), (W - r, H - r))

    return World(
        W,
        H,
        polys,
        dyn_pos,
        dyn_radius,
        dyn_speed,
        dyn_wp,
        RobotState(float(start[0]), float(start[1])),
        goal,
        rng,
        spec.stage,
        int(seed),
        0,
        spec.dyn_speed_range,
    )


def beam_directions(n_beams: int) -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(n_beams) / n_beams
    return np.column_stack((np.cos(ang), np.sin(ang)))


@dataclass(frozen=True)
class LidarScan:
    ranges: np.ndarray
    max_range: float

    @property
    def n_beams(self) -> int:
        return int(self.ranges.size)

    def points(self) -> np.ndarray:
        """Robot-frame hit points of beams that returned before max range."""
        hit = self.ranges < self.max_range
        return self.ranges[hit, None] * beam_directions(self.n_beams)[hit]

    def clearance(self, robot_radius: float) -> np.ndarray:
        return self.ranges - robot_radius

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.ranges).tobytes()).hexdigest()[:16]


def raycast(world: World, position, n_beams: int, max_range: float, dyn_pos: np.ndarray | None = None) -> np.ndarray:
    """Exact first-hit ranges against walls, polygons and discs."""
    p = np.asarray(position, dtype=float)
    dirs = beam_directions(n_beams)
    dx, dy = dirs[:, 0:1], dirs[:, 1:2]
    ranges = np.full(n_beams, float(max_range))

    segs = world.segments() - p
    a = segs[:, 0]
    e = segs[:, 1] - a
    denom = dx * e[None, :, 1] - dy * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (a[None, :, 0] * e[None, :, 1] - a[None, :, 1] * e[None, :, 0]) / denom
        u = (a[None, :, 0] * dy - a[None, :, 1] * dx) / denom
    ok = (denom != 0.0) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    if ok.any():
        ranges = np.minimum(ranges, np.where(ok, t, np.inf).min(axis=1))

    pos = world.dyn_pos if dyn_pos is None else dyn_pos
    if len(pos):
        w = pos - p
        r = world.dyn_radius
        b = dx * w[None, :, 0] + dy * w[None, :, 1]
        c = np.einsum("ij,ij->i", w, w) - r * r
        disc = b * b - c[None, :]
        with np.errstate(invalid="ignore"):
            t = b - np.sqrt(np.where(disc >= 0.0, disc, 0.0))
        inside = np.broadcast_to(c[None, :] <= 0.0, t.shape)
        t = np.where(inside, 0.0, t)
        ok = inside | ((disc >= 0.0) & (t >= 0.0))
        ranges = np.minimum(ranges, np.where(ok, t, np.inf).min(axis=1))
    return ranges


def lidar(world: World, config: EnvConfig | None = None) -> LidarScan:
    config = config or EnvConfig()
    ranges = raycast(world, world.robot.position, config.n_beams, config.lidar_range)
    if config.lidar_noise > 0.0:
        ranges = np.clip(ranges + world.rng.normal(0.0, config.lidar_noise, ranges.size), 0.0, config.lidar_range)
    return LidarScan(ranges, config.lidar_range)


def region_from_scan(scan: LidarScan, config: EnvConfig) -> tuple[ConvexRegion, ConvexRegion]:
    """Raw free region and the robot-centre region used for planning.

    The raw region excludes every hit point.  Eroding it by the robot radius
    plus a safety margin leaves the disc centres whose whole disc stays
    inside.  Near an obstacle the erosion depth is capped just below the
    robot's own depth in the raw region, so the planning region always
    contains the robot and never reaches further toward the obstacle.
    """
    raw = build_convex_region(scan.points(), (0.0, 0.0), config.lidar_range, config.seed_sides)
    _, offsets = half_planes(raw.vertices)
    depth = float(np.min(offsets))
    margin = min(config.robot_radius + config.safety_margin, depth - MIN_FREE_DEPTH)
    centres = erode_convex(raw, margin) if margin > 0.0 else None
    if centres is None:
        centres = raw
    return raw, normalize_vertex_count(centres, config.rnum_v)


def advance_movers(world: World, dt: float) -> None:
    """Move every disc straight toward its waypoint; re-sample on arrival."""
    if not len(world.dyn_pos):
        return
    W, H = world.arena_w, world.arena_h
    ox, oy = world.origin_offset
    for i in range(len(world.dyn_pos)):
        delta = world.dyn_waypoint[i] - world.dyn_pos[i]
        dist = math.hypot(delta[0], delta[1])
        stride = world.dyn_speed[i] * dt
        if dist <= stride:
            world.dyn_pos[i] = world.dyn_waypoint[i]
            r = world.dyn_radius[i]
            world.dyn_waypoint[i] = world.rng.uniform((ox + r, oy + r), (ox + W - r, oy + H - r))
            lo, hi = world.speed_range
            if hi > 0.0:
                world.dyn_speed[i] = world.rng.uniform(lo, hi)
        else:
            world.dyn_pos[i] = world.dyn_pos[i] + delta * (stride / dist)


def emergency_brake(x: RobotState, params: MpcParams) -> Jerk:
    """Jerk that drives acceleration toward the value cancelling velocity."""
    lim = params.limits
    t = params.t_c
    v = x.velocity
    a = x.acceleration
    a_des = np.clip(-v / t, -lim.a_max, lim.a_max)
    j = np.clip((a_des - a) / t, -lim.j_max, lim.j_max)
    return Jerk(float(j[0]), float(j[1]))


@dataclass
class StepOutcome:
    state: StackedState
    reward: RewardBreakdown
    done: bool
    success: bool
    collision: bool
    timeout: bool
    info: dict[str, Any]


class NavEnv:
    """One world, one robot; owned by a single worker."""

    def __init__(self, config: EnvConfig | None = None, stage: int | StageSpec = 1):
        self.config = config or EnvConfig()
        self.stage = get_stage(stage)
        self.mpc = MpcController(self.config.mpc)
        self._fine = discretize(self.config.t_c / self.config.substeps)
        self._coarse = discretize(self.config.t_c)
        self.world: World | None = None
        self.history = FrameStack()
        self.trace: list[dict] | None = None
        self.done = True

    @property
    def arena_diag(self) -> float:
        return math.hypot(self.stage.arena_w, self.stage.arena_h)

    def input_scale(self) -> np.ndarray:
        cfg = self.config
        lim = cfg.mpc.limits
        return input_scale(cfg.rnum_v, cfg.lidar_range, self.arena_diag, lim.v_max,
                           lim.v_max * cfg.t_c, lim.v_max * cfg.mpc.horizon)

    def reset(self, seed: int | None = None, world: World | None = None, record: bool = False) -> StackedState:
        if world is None:
            world = generate_scenario(self.stage, 0 if seed is None else seed, self.config)
        self.world = world
        self.t = 0
        self.done = False
        self.path_length = 0.0
        self.abs_acc = 0.0
        self._sense()
        self.d_prev = self._goal_distance()
        self.prev_refs_world: tuple[np.ndarray, np.ndarray] | None = None
        obs = compose_observation(self._robot_local(), self._goal_local(), self.region)
        self.trace = None
        if record:
            self.trace = [{"type": "episode", **world.layout_dict(), "t_c": self.config.t_c,
                           "robot_radius": self.config.robot_radius}]
        return self.history.reset(obs)

    def _robot_local(self) -> RobotState:
        return self.world.robot.with_position(0.0, 0.0)

    def _goal_local(self) -> np.ndarray:
        return self.world.goal - self.world.robot.position

    def _goal_distance(self) -> float:
        g = self._goal_local()
        return math.hypot(g[0], g[1])

    def _sense(self) -> None:
        self.scan = lidar(self.world, self.config)
        self.raw_region, self.region = region_from_scan(self.scan, self.config)

    def step(self, raw: RawAction | np.ndarray) -> StepOutcome:
        if self.done:
            raise RuntimeError("episode is done; call reset()")
        if not isinstance(raw, RawAction):
            raw = RawAction.from_array(raw)
        cfg = self.config
        world = self.world
        self.t += 1
        origin_world = world.robot.position
        decision_region = self.region.vertices.copy()

        # decode in the robot frame
        x_local = self._robot_local()
        speed = math.hypot(x_local.vx, x_local.vy)
        r_s, r_l = reach_radii(cfg.mpc, speed)
        refs = decode(raw, self.region, (0.0, 0.0), r_s, r_l)
        refs = goal_shortcut(self.region, self._goal_local(), refs)

        sol = self.mpc.solve(MpcProblem(x_local, refs.q_short, refs.q_long, self.region, refs.goal_in_convex))
        if sol.status == MpcStatus.FAILED:
            u = emergency_brake(x_local, cfg.mpc)
        else:
            u = Jerk(float(sol.u_star[0, 0]), float(sol.u_star[0, 1]))

        # integrate robot and movers together at sub-step resolution
        x = x_local.as_array()
        uj = u.as_array()
        dt = cfg.t_c / cfg.substeps
        min_clear = math.inf
        prev_pos = np.zeros(2)
        for _ in range(cfg.substeps):
            x = self._fine.F @ x + self._fine.G @ uj
            advance_movers(world, dt)
            pos = origin_world + x[0:2]
            min_clear = min(min_clear, point_clearance(world, pos) - cfg.robot_radius)
            self.path_length += math.hypot(*(x[0:2] - prev_pos))
            prev_pos = x[0:2]
        displacement = x[0:2].copy()
        world.robot = RobotState(
            origin_world[0] + displacement[0],
            origin_world[1] + displacement[1],
            x[2], x[3], x[4], x[5],
        )
        world.step_count += 1
        self.abs_acc += math.hypot(x[4], x[5])

        self._sense()
        d_t = self._goal_distance()
        collision = min_clear <= 0.0
        success = (d_t < cfg.reward.d_th) and not collision
        timeout = (self.t >= cfg.max_steps) and not (collision or success)
        scan_clear = float(np.min(self.scan.clearance(cfg.robot_radius)))
        clearance = min(min_clear, scan_clear) if collision else scan_clear

        refs_world = (origin_world + refs.q_short, origin_world + refs.q_long)
        if self.prev_refs_world is None:
            prev_s, prev_l = refs_world
        else:
            prev_s, prev_l = self.prev_refs_world
        ctx = StepContext(
            d_t=d_t,
            d_prev=self.d_prev,
            clearance=clearance,
            t=self.t,
            q_short=refs_world[0],
            q_long=refs_world[1],
            q_short_prev=prev_s,
            q_long_prev=prev_l,
            q1_star=origin_world + sol.q_star[0],
            qN_star=origin_world + sol.q_star[-1],
        )
        reward = compute_reward(ctx, cfg.reward)
        obs = compose_observation(
            self._robot_local(),
            self._goal_local(),
            self.region,
            refs.q_short - displacement,
            refs.q_long - displacement,
            sol.q_star[0] - displacement,
            sol.q_star[-1] - displacement,
            prev_origin=-displacement,
        )
        state = self.history.push(obs)
        self.prev_refs_world = refs_world
        self.d_prev = d_t
        self.done = collision or success or timeout
        info = {
            "t": self.t,
            "mpc_status": sol.status.value,
            "mpc_iterations": sol.iterations,
            "clearance": clearance,
            "d_goal": d_t,
            "path_length": self.path_length,
            "abs_acc": self.abs_acc,
        }
        if self.trace is not None:
            self.trace.append(self._record(raw, refs, sol, origin_world, decision_region, u, reward, success, collision, timeout))
        return StepOutcome(state, reward, self.done, success, collision, timeout, info)

    def _record(self, raw, refs: ReferencePoints, sol: MpcSolution, origin, region, u, reward, success, collision, timeout) -> dict:
        world = self.world
        return {
            "type": "step",
            "t": self.t,
            "state": world.robot.as_array().tolist(),
            "scan_digest": self.scan.digest(),
            "scan_min": float(np.min(self.scan.ranges)),
            "region": (region + origin).tolist(),
            "action": raw.as_array().tolist(),
            "refs": {"q_short": (origin + refs.q_short).tolist(), "q_long": (origin + refs.q_long).tolist(),
                     "goal_in_convex": refs.goal_in_convex},
            "q_star": (origin + sol.q_star).tolist(),
            "jerk": [u.jx, u.jy],
            "mpc_status": sol.status.value,
            "reward": reward.to_dict(),
            "dynamic": [[*c, r] for c, r in zip(world.dyn_pos.tolist(), world.dyn_radius.tolist())],
            "flags": {"success": success, "collision": collision, "timeout": timeout},
        }


def trace_to_jsonl(trace: list[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in trace)
