import csv
import io
import math

import numpy as np
import pytest

from convexnav.curriculum import TRAIN_SEED_LIMIT
from convexnav.env import EnvConfig, NavEnv, make_world
from convexnav.errors import ConfigMismatch
from convexnav.harness import (
    METRIC_COLUMNS,
    EpisodeResult,
    RandomAgent,
    ScenarioBank,
    compute_metrics,
    episode_abs_acc,
    evaluate,
    make_test_bank,
    metrics_csv,
    metrics_table,
    run_episode,
    write_outputs,
)
from convexnav.ppo import PolicyNet, ValueNet, make_checkpoint


def result(seed, success, time_s=1.0, dist=2.0, acc=3.0):
    return EpisodeResult(seed, 1, success, not success, False, 5, time_s, dist, dist / time_s, acc, 0.0)


def test_abs_acc_is_euclidean():
    assert episode_abs_acc(np.ones((10, 2))) == pytest.approx(10 * math.sqrt(2))


def test_metrics_average_over_successes_only():
    m = compute_metrics([result(1, True, 2.0, 4.0, 6.0), result(2, False, 99.0, 99.0, 99.0), result(3, True, 4.0, 8.0, 2.0)])
    assert m.success_rate == pytest.approx(200 / 3)
    assert (m.mean_time, m.mean_distance, m.mean_speed, m.total_abs_acc) == pytest.approx((3.0, 6.0, 2.0, 4.0))
    assert m.episodes == 3


def test_metrics_are_order_invariant():
    rows = [result(s, s % 3 == 0, 1.0 + s * 0.1, 2.0 + s, 0.5 * s) for s in range(20)]
    a = compute_metrics(rows)
    b = compute_metrics(list(reversed(rows)))
    assert a == b


def test_no_successes_gives_nan_means():
    m = compute_metrics([result(1, False)])
    assert m.success_rate == 0.0 and math.isnan(m.mean_time)


def test_banks_are_disjoint_from_training():
    bank = make_test_bank(5, 1000)
    assert min(bank.seeds) >= TRAIN_SEED_LIMIT and len(set(bank.seeds)) == 1000
    with pytest.raises(ConfigMismatch):
        ScenarioBank(1, (5,), "test")
    with pytest.raises(ConfigMismatch):
        ScenarioBank(1, (TRAIN_SEED_LIMIT,), "train")
    with pytest.raises(ConfigMismatch):
        ScenarioBank(1, (TRAIN_SEED_LIMIT, TRAIN_SEED_LIMIT))
    assert ScenarioBank.from_json(bank.to_json()) == bank


def test_goal_adjacent_scenario_succeeds_in_one_step():
    env = NavEnv()
    world = make_world(10.0, 10.0, (5.0, 5.0), (5.05, 5.0))
    res, _ = run_episode(env, RandomAgent(0), 0, world=world)
    assert res.success and res.steps == 1
    assert res.time_s == pytest.approx(env.config.t_c)
    m = compute_metrics([res])
    assert m.success_rate == 100.0 and m.mean_time == pytest.approx(env.config.t_c)


def test_three_scenario_eval_emits_five_metric_columns(tmp_path):
    bank = make_test_bank(5, 3)
    res = evaluate(None, bank, config=EnvConfig(max_steps=15))
    assert len(res.episodes) == 3 and [r.seed for r in res.episodes] == list(bank.seeds)
    text = metrics_csv([(5, res.metrics)])
    lines = text.splitlines()
    assert lines[0].startswith("# schema=")
    header, row = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(header) == ("stage", "episodes", *METRIC_COLUMNS) and len(METRIC_COLUMNS) == 5
    assert len(row) == len(header) == 7
    assert "Success Rate (%)" in metrics_table([(5, res.metrics)])
    paths = write_outputs(tmp_path, 5, res)
    assert paths["metrics"].read_text() == text


def test_same_checkpoint_and_bank_give_identical_metrics():
    cfg = EnvConfig(max_steps=10)
    rng = np.random.default_rng(0)
    ck = make_checkpoint(PolicyNet(cfg.state_dim, rng, (8,)), ValueNet(cfg.state_dim, rng, (8,)))
    bank = make_test_bank(2, 2)
    a = evaluate(ck, bank, config=cfg)
    b = evaluate(ck, bank, config=cfg)
    assert a.metrics == b.metrics or (a.metrics.success_rate == b.metrics.success_rate == 0.0)
    assert [r.row() for r in a.episodes] == [r.row() for r in b.episodes]


def test_parallel_eval_matches_serial():
    cfg = EnvConfig(max_steps=10)
    bank = make_test_bank(1, 4)
    serial = evaluate(None, bank, config=cfg)
    parallel = evaluate(None, bank, config=cfg, workers=2)
    assert [r.row() for r in serial.episodes] == [r.row() for r in parallel.episodes]


def test_checkpoint_dimension_mismatch():
    cfg = EnvConfig()
    rng = np.random.default_rng(0)
    ck = make_checkpoint(PolicyNet(10, rng, (4,)), ValueNet(10, rng, (4,)))
    with pytest.raises(ConfigMismatch):
        evaluate(ck, make_test_bank(1, 1), config=cfg)
