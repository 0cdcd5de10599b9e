import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.errors import ConfigMismatch, DimensionMismatch
from convexnav.oracles import brute_force_gae
from convexnav.ppo import (
    Batch,
    Optimizers,
    PolicyNet,
    PpoConfig,
    ValueNet,
    act,
    act_batch,
    gae,
    load_checkpoint,
    make_checkpoint,
    save_checkpoint,
    update,
)
from convexnav.selftest import check_policy_mean, check_squashed_quadrature, gradient_errors


def nets(dim=5, hidden=(8, 8), seed=0):
    rng = np.random.default_rng(seed)
    return PolicyNet(dim, rng, hidden), ValueNet(dim, rng, hidden)


def test_single_step_gae():
    adv, ret = gae([1.0], [0.5], [True], 0.99, 0.95)
    assert adv[0] == pytest.approx(0.5)
    assert ret[0] == pytest.approx(1.0)


def test_gae_bootstraps_from_last_value():
    adv, _ = gae([0.0, 0.0], [0.0, 0.0], [False, False], 0.5, 1.0, last_value=4.0)
    assert np.allclose(adv, [1.0, 2.0])


@given(st.integers(1, 40), st.integers(0, 10_000))
def test_gae_matches_brute_force(T, seed):
    rng = np.random.default_rng(seed)
    r, v = rng.normal(size=T), rng.normal(size=T)
    d = rng.random(T) < 0.2
    last = float(rng.normal())
    a, ret = gae(r, v, d, 0.99, 0.95, last_value=last)
    b, ret_b = brute_force_gae(r, v, d, 0.99, 0.95, last_value=last)
    assert np.allclose(a, b, atol=1e-10) and np.allclose(ret, ret_b, atol=1e-10)


def test_truncation_bootstraps_but_cuts_trace():
    adv, _ = gae([1.0, 1.0], [0.0, 0.0], [False, False], 0.9, 1.0, next_values=[5.0, 0.0], truncated=[True, False])
    assert adv[0] == pytest.approx(1.0 + 0.9 * 5.0)
    assert adv[1] == pytest.approx(1.0)


def test_gradients_match_finite_differences():
    pol_err, val_err = gradient_errors()
    assert pol_err < 1e-4 and val_err < 1e-4


def test_policy_mean_statistical():
    assert check_policy_mean().passed


def test_squashed_density_integrates_to_one():
    assert check_squashed_quadrature().passed


def test_forward_is_pure_and_actions_in_open_interval():
    policy, value = nets()
    x = np.random.default_rng(1).normal(size=(16, 5)) * 100
    assert np.array_equal(policy.mean(x), policy.mean(x))
    res = act_batch(policy, value, x, True, np.random.default_rng(2))
    assert np.all((res.actions > 0) & (res.actions < 1))
    raw, logp, v = act(policy, value, x[0], False)
    assert 0 < raw.alpha_s < 1 and np.isfinite(logp) and np.isfinite(v)


def test_parameter_sets_are_disjoint():
    policy, value = nets()
    ids = {id(p) for p in policy.params}
    assert ids.isdisjoint(id(p) for p in value.params)
    for p in policy.params:
        for q in value.params:
            assert not np.shares_memory(p, q)


def test_dimension_mismatch():
    policy, value = nets()
    with pytest.raises(DimensionMismatch):
        policy.mean(np.zeros((1, 6)))
    with pytest.raises(DimensionMismatch):
        value(np.zeros(4))


def test_init_mean_sets_output_bias():
    policy = PolicyNet(5, np.random.default_rng(0), (8,), init_mean=(0.0, 2.0, -3.0, 2.0))
    assert np.allclose(policy.mean(np.zeros(5)), (0.0, 2.0, -3.0, 2.0))


def test_stochastic_acting_needs_rng():
    policy, value = nets()
    with pytest.raises(ValueError):
        act_batch(policy, value, np.zeros(5), True)


def toy_update(seed=0):
    policy, value = nets(seed=seed)
    rng = np.random.default_rng(seed + 100)
    n = 64
    batch = Batch(rng.normal(size=(n, 5)), rng.normal(size=(n, 4)), np.zeros(n), rng.normal(size=n), rng.normal(size=n))
    batch.log_prob[:] = policy.log_prob(batch.states, batch.z)
    cfg = PpoConfig(epochs=3, minibatch=16, hidden=(8, 8))
    stats = update(batch, policy, value, cfg, np.random.default_rng(seed), Optimizers.for_config(cfg))
    return policy, value, stats


def test_update_is_deterministic_and_changes_params():
    p1, v1, s1 = toy_update()
    p2, v2, s2 = toy_update()
    p0, v0 = nets()
    assert all(np.array_equal(a, b) for a, b in zip(p1.params, p2.params))
    assert all(np.array_equal(a, b) for a, b in zip(v1.params, v2.params))
    assert s1 == s2
    assert any(not np.array_equal(a, b) for a, b in zip(p1.params, p0.params))


def test_value_regression_reduces_loss():
    policy, value = nets()
    rng = np.random.default_rng(3)
    n = 128
    states = rng.normal(size=(n, 5))
    returns = states[:, 0] - 0.5 * states[:, 1]
    batch = Batch(states, rng.normal(size=(n, 4)), np.zeros(n), np.zeros(n), returns)
    batch.log_prob[:] = policy.log_prob(states, batch.z)
    before = float(np.mean((value(states) - returns) ** 2))
    cfg = PpoConfig(epochs=30, minibatch=32, hidden=(8, 8))
    update(batch, policy, value, cfg, np.random.default_rng(0), Optimizers.for_config(cfg))
    after = float(np.mean((value(states) - returns) ** 2))
    assert after < 0.5 * before


def test_checkpoint_roundtrip(tmp_path):
    policy, value, _ = toy_update()
    path = tmp_path / "ck.npz"
    save_checkpoint(path, make_checkpoint(policy, value, {"stage": 2}))
    ck = load_checkpoint(path)
    assert ck.meta["stage"] == 2
    p2, v2 = ck.build()
    x = np.random.default_rng(5).normal(size=(4, 5))
    assert np.array_equal(policy.mean(x), p2.mean(x))
    assert np.array_equal(value(x), v2(x))
    assert np.array_equal(policy.log_std, p2.log_std)
    save_checkpoint(tmp_path / "again.npz", ck)
    assert (tmp_path / "again.npz").read_bytes() == path.read_bytes()


def test_checkpoint_version_mismatch(tmp_path):
    policy, value = nets()
    ck = make_checkpoint(policy, value, {"version": 999})
    path = tmp_path / "old.npz"
    save_checkpoint(path, ck)
    with pytest.raises(ConfigMismatch):
        load_checkpoint(path)


def test_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(gamma=1.0)
    with pytest.raises(ValueError):
        PpoConfig(epochs=0)
