"""Benchmark evaluation: scenario banks, agents, per-episode rows and metrics.

Metric conventions:

* success_rate is a percentage over all episodes in the bank.
* time, distance, speed and acceleration are averaged over successful
  episodes only; time is ``steps * t_c``.
* speed is per-episode distance / time, then averaged.
* total_abs_acc is the per-episode sum over steps of the Euclidean norm of
  ``(ax, ay)``, averaged over successful episodes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .curriculum import TRAIN_SEED_LIMIT
from .env import EnvConfig, NavEnv, World, get_stage, trace_to_jsonl
from .errors import ConfigMismatch
from .ppo import Checkpoint, act_batch, load_checkpoint

METRICS_SCHEMA = "convexnav-metrics/1"
METRIC_COLUMNS = ("success_rate", "mean_time_s", "mean_distance_m", "mean_speed_mps", "total_abs_acc")
TABLE_COLUMNS = ("stage", "episodes", *METRIC_COLUMNS)
EPISODE_COLUMNS = ("seed", "stage", "success", "collision", "timeout", "steps", "time_s", "distance_m", "speed_mps", "abs_acc", "return")


@dataclass(frozen=True)
class Metrics:
    success_rate: float
    mean_time: float
    mean_distance: float
    mean_speed: float
    total_abs_acc: float
    episodes: int = 0

    def row(self) -> tuple[float, ...]:
        return (self.success_rate, self.mean_time, self.mean_distance, self.mean_speed, self.total_abs_acc)


@dataclass(frozen=True)
class EpisodeResult:
    seed: int
    stage: int
    success: bool
    collision: bool
    timeout: bool
    steps: int
    time_s: float
    distance_m: float
    speed_mps: float
    abs_acc: float
    ret: float

    def row(self) -> tuple:
        return (self.seed, self.stage, int(self.success), int(self.collision), int(self.timeout), self.steps,
                self.time_s, self.distance_m, self.speed_mps, self.abs_acc, self.ret)


def episode_abs_acc(accelerations) -> float:
    """Sum over steps of the Euclidean norm of each ``(ax, ay)`` row."""
    a = np.asarray(accelerations, dtype=float).reshape(-1, 2)
    return float(np.sum(np.hypot(a[:, 0], a[:, 1])))


def compute_metrics(results: list[EpisodeResult]) -> Metrics:
    ordered = sorted(results, key=lambda r: r.seed)
    wins = [r for r in ordered if r.success]
    n = len(ordered)
    rate = 100.0 * len(wins) / n if n else 0.0
    if not wins:
        nan = float("nan")
        return Metrics(rate, nan, nan, nan, nan, n)
    return Metrics(
        rate,
        float(np.mean([r.time_s for r in wins])),
        float(np.mean([r.distance_m for r in wins])),
        float(np.mean([r.speed_mps for r in wins])),
        float(np.mean([r.abs_acc for r in wins])),
        n,
    )


@dataclass(frozen=True)
class ScenarioBank:
    stage: int
    seeds: tuple[int, ...]
    tag: str = "test"

    def __post_init__(self) -> None:
        if self.tag not in ("train", "test"):
            raise ConfigMismatch(f"bank tag must be 'train' or 'test', got {self.tag!r}")
        seeds = np.asarray(self.seeds, dtype=np.int64)
        if self.tag == "test" and np.any(seeds < TRAIN_SEED_LIMIT):
            raise ConfigMismatch("test bank contains seeds from the training range")
        if self.tag == "train" and np.any(seeds >= TRAIN_SEED_LIMIT):
            raise ConfigMismatch("training bank contains seeds from the test range")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigMismatch("bank seeds must be unique")

    def to_json(self) -> str:
        return json.dumps({"stage": self.stage, "tag": self.tag, "seeds": list(self.seeds)}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioBank":
        d = json.loads(text)
        return cls(int(d["stage"]), tuple(int(s) for s in d["seeds"]), d.get("tag", "test"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioBank":
        return cls.from_json(Path(path).read_text())


def make_test_bank(stage: int, n: int, offset: int = 0) -> ScenarioBank:
    """Held-out seeds live at or above the training seed ceiling."""
    base = TRAIN_SEED_LIMIT + offset
    return ScenarioBank(stage, tuple(range(base, base + n)), "test")


class Agent(Protocol):
    def begin(self, seed: int) -> None: ...

    def act(self, state: np.ndarray) -> np.ndarray: ...


class RandomAgent:
    """Uniform raw actions; the stream is re-seeded per episode."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def begin(self, seed: int) -> None:
        self.rng = np.random.default_rng([self.seed, seed])

    def act(self, state: np.ndarray) -> np.ndarray:
        return self.rng.uniform(1e-6, 1.0 - 1e-6, 4)


class PolicyAgent:
    def __init__(self, checkpoint: Checkpoint, deterministic: bool = True, seed: int = 0):
        self.checkpoint = checkpoint
        self.policy, self.value = checkpoint.build()
        self.deterministic = deterministic
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def begin(self, seed: int) -> None:
        self.rng = np.random.default_rng([self.seed, seed])

    def act(self, state: np.ndarray) -> np.ndarray:
        return act_batch(self.policy, self.value, state, not self.deterministic, self.rng).actions[0]


def check_compatible(checkpoint: Checkpoint, config: EnvConfig) -> None:
    if checkpoint.input_dim != config.state_dim:
        raise ConfigMismatch(
            f"checkpoint expects {checkpoint.input_dim} inputs but the environment produces {config.state_dim} "
            f"(rnum_v={config.rnum_v})"
        )


def run_episode(env: NavEnv, agent: Agent, seed: int, world: World | None = None, record: bool = False):
    agent.begin(seed)
    state = env.reset(seed=seed, world=world, record=record).flatten()
    ret = 0.0
    while True:
        out = env.step(agent.act(state))
        ret += out.reward.total
        state = out.state.flatten()
        if out.done:
            break
    steps = env.t
    t = steps * env.config.t_c
    dist = env.path_length
    res = EpisodeResult(
        seed=seed,
        stage=env.stage.stage,
        success=out.success,
        collision=out.collision,
        timeout=out.timeout,
        steps=steps,
        time_s=t,
        distance_m=dist,
        speed_mps=dist / t if t > 0 else 0.0,
        abs_acc=env.abs_acc,
        ret=ret,
    )
    return res, env.trace


@dataclass
class EvalResult:
    metrics: Metrics
    episodes: list[EpisodeResult]
    traces: dict[int, list[dict]] = field(default_factory=dict)


def _eval_chunk(args) -> tuple[list[EpisodeResult], dict[int, list[dict]]]:
    config, stage, seeds, agent, record = args
    env = NavEnv(config, stage)
    rows, traces = [], {}
    for seed in seeds:
        res, trace = run_episode(env, agent, seed, record=record)
        rows.append(res)
        if record and trace is not None:
            traces[seed] = trace
    return rows, traces


def evaluate(
    checkpoint: Checkpoint | str | Path | None,
    bank: ScenarioBank,
    deterministic: bool = True,
    config: EnvConfig | None = None,
    workers: int = 1,
    record: bool = False,
    agent: Agent | None = None,
) -> EvalResult:
    """Run every bank seed once; ``checkpoint=None`` with no agent uses a random policy."""
    config = config or EnvConfig()
    if agent is None:
        if checkpoint is None:
            agent = RandomAgent()
        else:
            ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)
            check_compatible(ckpt, config)
            agent = PolicyAgent(ckpt, deterministic)
    stage = get_stage(bank.stage)
    seeds = list(bank.seeds)
    if workers <= 1 or len(seeds) < 2:
        rows, traces = _eval_chunk((config, stage, seeds, agent, record))
    else:
        chunks = [seeds[i::workers] for i in range(workers)]
        rows, traces = [], {}
        with ProcessPoolExecutor(workers) as pool:
            for r, t in pool.map(_eval_chunk, [(config, stage, c, agent, record) for c in chunks if c]):
                rows.extend(r)
                traces.update(t)
    rows.sort(key=lambda r: r.seed)
    traces = {k: traces[k] for k in sorted(traces)}
    return EvalResult(compute_metrics(rows), rows, traces)


def _num(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.4f}"


def metrics_csv(rows: list[tuple[int, Metrics]]) -> str:
    """Versioned metrics table; the first line names the schema and norm."""
    buf = io.StringIO()
    buf.write(f"# schema={METRICS_SCHEMA} abs_acc_norm=euclidean time=steps*t_c means_over=successful\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for stage, m in rows:
        w.writerow((stage, m.episodes, *(_num(v) for v in m.row())))
    return buf.getvalue()


def metrics_table(rows: list[tuple[int, Metrics]]) -> str:
    heads = ("Stage", "Episodes", "Success Rate (%)", "Time (s)", "Distance (m)", "Speed (m/s)", "Total Abs Acc")
    body = [(str(s), str(m.episodes), *(_num(v) for v in m.row())) for s, m in rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(heads)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(heads, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines)


def episodes_csv(results: list[EpisodeResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_COLUMNS)
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def traces_jsonl(traces: dict[int, list[dict]]) -> str:
    parts = []
    for seed in sorted(traces):
        parts.append(trace_to_jsonl([{"episode": seed, **rec} for rec in traces[seed]]))
    return "".join(parts)


def write_outputs(out_dir: str | Path, stage: int, result: EvalResult) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.csv",
        "episodes": out / "episodes.csv",
    }
    paths["metrics"].write_text(metrics_csv([(stage, result.metrics)]))
    paths["episodes"].write_text(episodes_csv(result.episodes))
    if result.traces:
        paths["traces"] = out / "traces.jsonl"
        paths["traces"].write_text(traces_jsonl(result.traces))
    return paths


def metrics_dict(m: Metrics) -> dict:
    return asdict(m)
