"""Step reward: success, obstacle proximity, progress, reference-point change,
MPC feasibility gap and a constant step penalty.

The progress term is ``w_approach * (d_prev - d_t)``, i.e. positive when the
robot got closer to the goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

VARIANTS = ("rt1", "rt2", "rt3", "rt4")


@dataclass(frozen=True)
class RewardConfig:
    r_success: float = 20.0
    r_collision: float = -20.0
    r_obs: float = -2.0
    w_obs: float = 2.0
    obs_zone: float = 2.0
    w_approach: float = 2.0
    w_feasible_s: float = -0.5
    w_feasible_l: float = -0.5
    w_change_s: float = -0.5
    w_change_l: float = -0.5
    r_step: float = -0.05
    d_th: float = 0.5
    enable_c: bool = True
    enable_f: bool = True

    def __post_init__(self) -> None:
        checks = {
            "r_success": self.r_success >= 0,
            "r_collision": self.r_collision <= 0,
            "r_obs": self.r_obs <= 0,
            "w_obs": self.w_obs > 0,
            "w_approach": self.w_approach >= 0,
            "w_feasible_s": self.w_feasible_s <= 0,
            "w_feasible_l": self.w_feasible_l <= 0,
            "w_change_s": self.w_change_s <= 0,
            "w_change_l": self.w_change_l <= 0,
            "r_step": self.r_step <= 0,
            "d_th": self.d_th > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"reward config has wrong-signed fields: {', '.join(bad)}")


@dataclass(frozen=True)
class StepContext:
    """Everything the reward needs about one step; points share one frame."""

    d_t: float
    d_prev: float
    clearance: float
    t: int
    q_short: np.ndarray
    q_long: np.ndarray
    q_short_prev: np.ndarray
    q_long_prev: np.ndarray
    q1_star: np.ndarray
    qN_star: np.ndarray


@dataclass(frozen=True)
class RewardBreakdown:
    e: float
    s: float
    a: float
    o: float
    c: float
    f: float

    @property
    def total(self) -> float:
        return self.e + self.s + self.a + self.o + self.c + self.f

    def to_dict(self) -> dict:
        return {"e": self.e, "s": self.s, "a": self.a, "o": self.o, "c": self.c, "f": self.f, "total": self.total}


def _sq(a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(d @ d)


def obstacle_term(clearance: float, config: RewardConfig) -> float:
    if clearance <= 0.0:
        return config.r_collision
    if clearance <= config.obs_zone:
        return config.r_obs * math.exp(-config.w_obs * clearance)
    return 0.0


def compute_reward(ctx: StepContext, config: RewardConfig) -> RewardBreakdown:
    s = config.r_success if ctx.d_t < config.d_th else 0.0
    o = obstacle_term(ctx.clearance, config)
    a = 0.0 if ctx.t <= 1 else config.w_approach * (ctx.d_prev - ctx.d_t)
    c = 0.0
    if config.enable_c and ctx.t > 1:
        c = config.w_change_s * _sq(ctx.q_short, ctx.q_short_prev) + config.w_change_l * _sq(
            ctx.q_long, ctx.q_long_prev
        )
    f = 0.0
    if config.enable_f:
        f = config.w_feasible_s * _sq(ctx.q_short, ctx.q1_star) + config.w_feasible_l * _sq(ctx.q_long, ctx.qN_star)
    return RewardBreakdown(e=config.r_step, s=s, a=a, o=o, c=c, f=f)


def select_config(variant: str, base: RewardConfig | None = None) -> RewardConfig:
    """``rt1`` all terms, ``rt2`` no change term, ``rt3`` no feasibility term, ``rt4`` neither."""
    base = base or RewardConfig()
    flags = {
        "rt1": (True, True),
        "rt2": (False, True),
        "rt3": (True, False),
        "rt4": (False, False),
    }
    if variant not in flags:
        raise ValueError(f"unknown reward variant {variant!r}; expected one of {VARIANTS}")
    enable_c, enable_f = flags[variant]
    return replace(base, enable_c=enable_c, enable_f=enable_f)
