"""Flat ``key = value`` run configuration with a typed schema.

Every run writes the fully resolved file next to its outputs, so a run can be
repeated from that file alone.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .curriculum import DEFAULT_THRESHOLDS, CurriculumConfig
from .dynamics import Limits
from .env import EnvConfig
from .errors import ConfigError
from .mpc import MpcParams
from .ppo import PpoConfig
from .reward import RewardConfig, select_config

SECTION = "run"


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    required: bool = False
    doc: str = ""


SCHEMA: dict[str, Field] = {
    # run
    "seed": Field(int, 0, True, "master seed for networks, rollouts and training worlds"),
    "start_stage": Field(int, 1, True, "first curriculum stage"),
    "final_stage": Field(int, 7, True, "last curriculum stage"),
    "budget_seconds": Field(float, float("inf"), True, "wall-clock training budget"),
    "max_updates": Field(int, 10_000, False, "PPO updates before the trainer declares a stuck stage"),
    "thresholds": Field(_floats, tuple(DEFAULT_THRESHOLDS[s] for s in range(1, 8)), False, "promotion success rate per stage 1..7"),
    "window": Field(int, 100, False, "episodes in the rolling success window"),
    "reward_variant": Field(str, "rt1", False, "rt1 | rt2 | rt3 | rt4"),
    # environment
    "robot_radius": Field(float, 0.3),
    "safety_margin": Field(float, 0.05, False, "erosion beyond the robot radius"),
    "n_beams": Field(int, 360),
    "lidar_range": Field(float, 8.0),
    "lidar_noise": Field(float, 0.0),
    "seed_sides": Field(int, 24),
    "rnum_v": Field(int, 16),
    "max_steps": Field(int, 150),
    "substeps": Field(int, 10),
    # mpc
    "N": Field(int, 10),
    "t_c": Field(float, 0.2),
    "w_track": Field(float, 10.0),
    "w_smooth": Field(float, 0.01),
    "w_vend": Field(float, 5.0),
    "w_aend": Field(float, 5.0),
    "v_max": Field(float, 3.0),
    "a_max": Field(float, 3.0),
    "j_max": Field(float, 10.0),
    "qp_max_iter": Field(int, 4000),
    "qp_tol": Field(float, 1e-6),
    # reward
    "r_success": Field(float, 20.0),
    "r_collision": Field(float, -20.0),
    "r_obs": Field(float, -2.0),
    "w_obs": Field(float, 2.0),
    "obs_zone": Field(float, 2.0),
    "w_approach": Field(float, 2.0),
    "w_feasible_s": Field(float, -0.5),
    "w_feasible_l": Field(float, -0.5),
    "w_change_s": Field(float, -0.5),
    "w_change_l": Field(float, -0.5),
    "r_step": Field(float, -0.05),
    "d_th": Field(float, 0.5),
    # ppo
    "gamma": Field(float, 0.99),
    "gae_lambda": Field(float, 0.95),
    "clip_eps": Field(float, 0.2),
    "epochs": Field(int, 8),
    "minibatch": Field(int, 256),
    "rollout_steps": Field(int, 4096),
    "n_worlds": Field(int, 8),
    "lr_policy": Field(float, 3e-4),
    "lr_value": Field(float, 1e-3),
    "ent_coef": Field(float, 0.003),
    "max_grad_norm": Field(float, 0.5),
    "hidden": Field(_ints, (256, 256)),
    "init_log_std": Field(float, 0.0),
    "init_mean": Field(_floats, (0.0, 0.0, 0.0, 0.0), False, "pre-sigmoid initial action mean: alpha_s, beta_s, alpha_l, beta_l"),
}


def parse_text(text: str, require: bool = True) -> dict[str, Any]:
    """Parse and validate; unknown keys and missing required keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = dict(cp[SECTION])
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'")
    values: dict[str, Any] = {}
    for key, spec in SCHEMA.items():
        if key in raw:
            try:
                values[key] = spec.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"config key '{key}' has an invalid value {raw[key]!r}: {exc}") from None
        elif spec.required and require:
            raise ConfigError(f"missing required config key '{key}'")
        else:
            values[key] = spec.default
    return values


def load(path: str | Path, require: bool = True) -> dict[str, Any]:
    return parse_text(Path(path).read_text(), require)


def defaults() -> dict[str, Any]:
    return {k: f.default for k, f in SCHEMA.items()}


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def dump(values: dict[str, Any]) -> str:
    lines = [f"{k} = {_render(values[k])}" for k in sorted(values)]
    return "\n".join(lines) + "\n"


def write_resolved(values: dict[str, Any], out_dir: str | Path) -> Path:
    path = Path(out_dir) / "resolved_config.cfg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump(values))
    return path


def env_config(v: dict[str, Any]) -> EnvConfig:
    mpc = MpcParams(
        w_track=v["w_track"],
        w_smooth=v["w_smooth"],
        w_vend=v["w_vend"],
        w_aend=v["w_aend"],
        N=v["N"],
        t_c=v["t_c"],
        limits=Limits(v["v_max"], v["a_max"], v["j_max"]),
        max_iter=v["qp_max_iter"],
        tol=v["qp_tol"],
    )
    reward = RewardConfig(
        r_success=v["r_success"],
        r_collision=v["r_collision"],
        r_obs=v["r_obs"],
        w_obs=v["w_obs"],
        obs_zone=v["obs_zone"],
        w_approach=v["w_approach"],
        w_feasible_s=v["w_feasible_s"],
        w_feasible_l=v["w_feasible_l"],
        w_change_s=v["w_change_s"],
        w_change_l=v["w_change_l"],
        r_step=v["r_step"],
        d_th=v["d_th"],
    )
    reward = select_config(v["reward_variant"], reward)
    return EnvConfig(
        robot_radius=v["robot_radius"],
        safety_margin=v["safety_margin"],
        n_beams=v["n_beams"],
        lidar_range=v["lidar_range"],
        lidar_noise=v["lidar_noise"],
        seed_sides=v["seed_sides"],
        rnum_v=v["rnum_v"],
        max_steps=v["max_steps"],
        substeps=v["substeps"],
        mpc=mpc,
        reward=reward,
    )


def ppo_config(v: dict[str, Any]) -> PpoConfig:
    return PpoConfig(
        gamma=v["gamma"],
        gae_lambda=v["gae_lambda"],
        clip_eps=v["clip_eps"],
        epochs=v["epochs"],
        minibatch=v["minibatch"],
        rollout_steps=v["rollout_steps"],
        n_worlds=v["n_worlds"],
        lr_policy=v["lr_policy"],
        lr_value=v["lr_value"],
        ent_coef=v["ent_coef"],
        max_grad_norm=v["max_grad_norm"],
        hidden=tuple(v["hidden"]),
        init_log_std=v["init_log_std"],
        init_mean=tuple(v["init_mean"]),
        seed=v["seed"],
    )


def curriculum_config(v: dict[str, Any]) -> CurriculumConfig:
    thr = tuple(v["thresholds"])
    if len(thr) != 7:
        raise ConfigError("config key 'thresholds' needs one value per stage (7)")
    return CurriculumConfig(
        start_stage=v["start_stage"],
        final_stage=v["final_stage"],
        thresholds={i + 1: float(t) for i, t in enumerate(thr)},
        window=v["window"],
        budget_seconds=v["budget_seconds"],
        max_updates=v["max_updates"],
    )


def with_overrides(values: dict[str, Any], **kw) -> dict[str, Any]:
    out = dict(values)
    for k, val in kw.items():
        if val is None:
            continue
        if k not in SCHEMA:
            raise ConfigError(f"unknown config key '{k}'")
        out[k] = val
    return out


__all__ = [
    "SCHEMA",
    "parse_text",
    "load",
    "defaults",
    "dump",
    "write_resolved",
    "env_config",
    "ppo_config",
    "curriculum_config",
    "with_overrides",
]
