"""Staged PPO training: promote to the next stage once the rolling success
rate over recent episodes clears the stage threshold."""

from __future__ import annotations

import csv
import logging
import pickle
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvConfig, NavEnv
from .errors import WallClockBudgetExceeded
from .ppo import (
    Batch,
    Optimizers,
    PolicyNet,
    PpoConfig,
    ValueNet,
    act_batch,
    gae,
    make_checkpoint,
    save_checkpoint,
    update,
)

log = logging.getLogger(__name__)

TRAIN_SEED_LIMIT = 1_000_000_000
CURVE_COLUMNS = ("episode", "stage", "success_rolling", "return")
DEFAULT_THRESHOLDS = {1: 0.9, 2: 0.9, 3: 0.9, 4: 0.9, 5: 0.8, 6: 0.8, 7: 0.8}


@dataclass(frozen=True)
class CurriculumConfig:
    start_stage: int = 1
    final_stage: int = 7
    thresholds: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    window: int = 100
    budget_seconds: float = float("inf")
    max_updates: int = 10_000
    stop_after_final: bool = True


@dataclass
class TrainResult:
    stage: int
    reason: str
    updates: int
    episodes: int
    elapsed: float
    checkpoints: dict[int, str]
    last_checkpoint: str | None
    success_rolling: float

    @property
    def stuck_stage(self) -> int | None:
        return self.stage if self.reason == "stuck" else None


class RunningVariance:
    """Welford accumulator used to scale rewards by the spread of discounted returns."""

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def std(self) -> float:
        if self.count < 2:
            return 1.0
        return max(float(np.sqrt(self.m2 / (self.count - 1))), 1e-2)


class Trainer:
    """Owns the networks, optimisers, worlds and every RNG stream."""

    def __init__(
        self,
        env_config: EnvConfig | None = None,
        ppo_config: PpoConfig | None = None,
        curriculum: CurriculumConfig | None = None,
        out_dir: str | Path | None = None,
    ):
        self.env_config = env_config or EnvConfig()
        self.ppo = ppo_config or PpoConfig()
        self.curriculum = curriculum or CurriculumConfig()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        seeds = np.random.SeedSequence(self.ppo.seed).spawn(4)
        init_rng = np.random.default_rng(seeds[0])
        self.rng = np.random.default_rng(seeds[1])
        self.update_rng = np.random.default_rng(seeds[2])
        self.seed_rng = np.random.default_rng(seeds[3])
        self.stage = self.curriculum.start_stage
        probe = NavEnv(self.env_config, self.stage)
        dim = self.env_config.state_dim
        scale = probe.input_scale()
        self.policy = PolicyNet(dim, init_rng, self.ppo.hidden, 4, scale, self.ppo.init_log_std, self.ppo.init_mean)
        self.value = ValueNet(dim, init_rng, self.ppo.hidden, scale)
        self.optim = Optimizers.for_config(self.ppo)
        self.updates = 0
        self.episodes = 0
        self.elapsed = 0.0
        self.window: deque[float] = deque(maxlen=self.curriculum.window)
        self.stage_episodes = 0
        self.checkpoints: dict[int, str] = {}
        self.curve: list[tuple] = []
        self.finished = False
        self.ret_stats = RunningVariance()
        self._start_envs()

    def _next_seed(self) -> int:
        return int(self.seed_rng.integers(0, TRAIN_SEED_LIMIT))

    def _start_envs(self) -> None:
        self.envs = [NavEnv(self.env_config, self.stage) for _ in range(self.ppo.n_worlds)]
        self.states = np.stack([env.reset(seed=self._next_seed()).flatten() for env in self.envs])
        self.ep_returns = np.zeros(len(self.envs))
        self.disc_returns = np.zeros(len(self.envs))

    @property
    def success_rolling(self) -> float:
        return float(np.mean(self.window)) if self.window else 0.0

    def meta(self) -> dict:
        return {
            "stage": self.stage,
            "updates": self.updates,
            "episodes": self.episodes,
            "ppo_config": self.ppo.digest(),
            "rnum_v": self.env_config.rnum_v,
            "input_dim": self.env_config.state_dim,
            "reward": {"enable_c": self.env_config.reward.enable_c, "enable_f": self.env_config.reward.enable_f},
        }

    def collect(self) -> Batch:
        n_env = len(self.envs)
        T = max(1, self.ppo.rollout_steps // n_env)
        D = self.states.shape[1]
        obs = np.zeros((T, n_env, D))
        zs = np.zeros((T, n_env, 4))
        logps = np.zeros((T, n_env))
        vals = np.zeros((T, n_env))
        rews = np.zeros((T, n_env))
        dones = np.zeros((T, n_env), dtype=bool)
        truncs = np.zeros((T, n_env), dtype=bool)
        next_vals = np.zeros((T, n_env))
        for t in range(T):
            res = act_batch(self.policy, self.value, self.states, True, self.rng)
            obs[t] = self.states
            zs[t] = res.z
            logps[t] = res.log_prob
            vals[t] = res.value
            for i, env in enumerate(self.envs):
                out = env.step(res.actions[i])
                r = out.reward.total
                rews[t, i] = r
                self.ep_returns[i] += r
                self.disc_returns[i] = self.disc_returns[i] * self.ppo.gamma + r
                self.ret_stats.push(self.disc_returns[i])
                nxt = out.state.flatten()
                if out.done:
                    dones[t, i] = out.success or out.collision
                    truncs[t, i] = out.timeout
                    if out.timeout:
                        next_vals[t, i] = float(self.value(nxt)[0])
                    self._episode_end(bool(out.success), self.ep_returns[i])
                    self.ep_returns[i] = 0.0
                    self.disc_returns[i] = 0.0
                    nxt = env.reset(seed=self._next_seed()).flatten()
                self.states[i] = nxt
        rews = rews / self.ret_stats.std()
        last = self.value(self.states)
        advs, rets = [], []
        for i in range(n_env):
            nv = np.append(vals[1:, i], last[i])
            nv = np.where(truncs[:, i], next_vals[:, i], nv)
            a, r = gae(rews[:, i], vals[:, i], dones[:, i], self.ppo.gamma, self.ppo.gae_lambda,
                       next_values=nv, truncated=truncs[:, i])
            advs.append(a)
            rets.append(r)
        return Batch(
            obs.transpose(1, 0, 2).reshape(-1, D),
            zs.transpose(1, 0, 2).reshape(-1, 4),
            logps.T.reshape(-1),
            np.concatenate(advs),
            np.concatenate(rets),
        )

    def _episode_end(self, success: bool, ret: float) -> None:
        self.episodes += 1
        self.stage_episodes += 1
        self.window.append(1.0 if success else 0.0)
        row = (self.episodes, self.stage, round(self.success_rolling, 6), round(float(ret), 6))
        self.curve.append(row)
        if self.out_dir is not None:
            self._curve_writer.writerow(row)

    def _save_stage_checkpoint(self, name: str) -> str | None:
        if self.out_dir is None:
            return None
        path = self.out_dir / f"{name}.npz"
        save_checkpoint(path, make_checkpoint(self.policy, self.value, self.meta()))
        return str(path)

    def _maybe_promote(self) -> bool:
        cur = self.curriculum
        thr = cur.thresholds.get(self.stage, 0.9)
        if self.stage_episodes < cur.window or self.success_rolling < thr:
            return False
        path = self._save_stage_checkpoint(f"stage{self.stage}")
        if path:
            self.checkpoints[self.stage] = path
        log.info("stage %d passed (rolling success %.3f) after %d updates", self.stage, self.success_rolling, self.updates)
        if self.stage >= cur.final_stage:
            self.finished = True
            return True
        self.stage += 1
        self.window.clear()
        self.stage_episodes = 0
        self._start_envs()
        return True

    def train(self, n_updates: int | None = None) -> TrainResult:
        cur = self.curriculum
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            curve_path = self.out_dir / "curve.csv"
            new = not curve_path.exists() or self.episodes == 0
            fh = curve_path.open("w" if new else "a", newline="")
            self._curve_writer = csv.writer(fh)
            if new:
                self._curve_writer.writerow(CURVE_COLUMNS)
                for row in self.curve:
                    self._curve_writer.writerow(row)
        else:
            fh = None
        reason = "stuck"
        target = self.updates + n_updates if n_updates is not None else cur.max_updates
        t_last = time.perf_counter()
        try:
            while True:
                if self.finished:
                    reason = "complete"
                    break
                if self.updates >= min(target, cur.max_updates):
                    reason = "paused" if n_updates is not None and self.updates < cur.max_updates else "stuck"
                    break
                if self.elapsed >= cur.budget_seconds:
                    raise WallClockBudgetExceeded(f"budget of {cur.budget_seconds:.0f}s spent at stage {self.stage}")
                batch = self.collect()
                stats = update(batch, self.policy, self.value, self.ppo, self.update_rng, self.optim)
                self.updates += 1
                now = time.perf_counter()
                self.elapsed += now - t_last
                t_last = now
                log.info(
                    "update %d stage %d episodes %d success %.3f value_loss %.4f entropy %.3f elapsed %.0fs",
                    self.updates, self.stage, self.episodes, self.success_rolling,
                    stats.get("value_loss", float("nan")), stats.get("entropy", float("nan")), self.elapsed,
                )
                if fh is not None:
                    fh.flush()
                if self._maybe_promote() and self.finished and cur.stop_after_final:
                    reason = "complete"
                    break
        except WallClockBudgetExceeded as exc:
            log.warning("%s; ending with the last checkpoint", exc)
            reason = "budget"
        finally:
            if fh is not None:
                fh.close()
        last = self._save_stage_checkpoint("last")
        return TrainResult(self.stage, reason, self.updates, self.episodes, self.elapsed, dict(self.checkpoints),
                           last, self.success_rolling)

    def save_state(self, path: str | Path) -> None:
        state = {k: v for k, v in self.__dict__.items() if k != "_curve_writer"}
        Path(path).write_bytes(pickle.dumps(state))

    @classmethod
    def load_state(cls, path: str | Path) -> "Trainer":
        obj = cls.__new__(cls)
        obj.__dict__.update(pickle.loads(Path(path).read_bytes()))
        return obj


def train_curriculum(
    env_config: EnvConfig | None = None,
    ppo_config: PpoConfig | None = None,
    curriculum: CurriculumConfig | None = None,
    out_dir: str | Path | None = None,
) -> TrainResult:
    return Trainer(env_config, ppo_config, curriculum, out_dir).train()
