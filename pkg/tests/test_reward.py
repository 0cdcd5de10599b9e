import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexnav.reward import VARIANTS, RewardConfig, StepContext, compute_reward, obstacle_term, select_config

pt = st.tuples(st.floats(-10, 10), st.floats(-10, 10)).map(np.array)
Z = np.zeros(2)


def ctx(**kw):
    base = dict(d_t=5.0, d_prev=5.0, clearance=100.0, t=2, q_short=Z, q_long=Z, q_short_prev=Z, q_long_prev=Z, q1_star=Z, qN_star=Z)
    base.update(kw)
    return StepContext(**base)


def test_first_step_has_no_approach_or_change():
    r = compute_reward(ctx(t=1, d_prev=9.0, q_short=np.ones(2)), RewardConfig())
    assert r.a == 0.0 and r.c == 0.0


def test_obstacle_boundary_inclusive():
    cfg = replace(RewardConfig(), r_obs=-2.0, w_obs=1.0)
    assert obstacle_term(2.0, cfg) == pytest.approx(-2.0 * math.exp(-2.0))
    assert obstacle_term(2.0, cfg) == pytest.approx(-0.2707, abs=1e-4)
    assert obstacle_term(2.0 + 1e-9, cfg) == 0.0
    assert obstacle_term(0.0, cfg) == cfg.r_collision


def test_success_total():
    r = compute_reward(ctx(d_t=0.1, d_prev=0.1, t=1), RewardConfig())
    assert r.total == pytest.approx(19.95, abs=1e-12)
    assert (r.s, r.e) == (20.0, -0.05)


def test_hand_computed_shaping_terms():
    cfg = RewardConfig()
    r = compute_reward(
        ctx(d_t=4.0, d_prev=4.5, q_short=np.array([1.0, 0.0]), q_short_prev=np.array([0.0, 0.0]),
            q_long=np.array([3.0, 4.0]), q_long_prev=np.array([3.0, 2.0]),
            q1_star=np.array([1.0, 1.0]), qN_star=np.array([0.0, 4.0])),
        cfg,
    )
    assert r.a == pytest.approx(1.0)
    assert r.c == pytest.approx(-0.5 * 1.0 - 0.5 * 4.0)
    assert r.f == pytest.approx(-0.5 * 1.0 - 0.5 * 9.0)


@pytest.mark.parametrize("variant,c,f", [("rt1", True, True), ("rt2", False, True), ("rt3", True, False), ("rt4", False, False)])
def test_variant_flags(variant, c, f):
    cfg = select_config(variant)
    assert (cfg.enable_c, cfg.enable_f) == (c, f)


def test_unknown_variant():
    with pytest.raises(ValueError):
        select_config("rt9")


def test_wrong_sign_rejected():
    with pytest.raises(ValueError):
        RewardConfig(r_obs=1.0)


@given(st.floats(0, 20), st.floats(0, 20), st.floats(-1, 5), st.integers(1, 150), pt, pt, pt, pt, pt, pt)
def test_sign_structure_and_identity(d_t, d_prev, clear, t, a, b, c, d, e, f):
    context = ctx(d_t=d_t, d_prev=d_prev, clearance=clear, t=t, q_short=a, q_long=b, q_short_prev=c, q_long_prev=d, q1_star=e, qN_star=f)
    out = {v: compute_reward(context, select_config(v)) for v in VARIANTS}
    r = out["rt1"]
    assert r.s >= 0 and r.o <= 0 and r.c <= 0 and r.f <= 0 and r.e <= 0
    if t > 1 and d_t < d_prev:
        assert r.a > 0
    assert out["rt4"].c == 0.0 and out["rt4"].f == 0.0
    assert out["rt1"].total == pytest.approx(out["rt4"].total + r.c + r.f, abs=1e-9)
    assert out["rt2"].total == pytest.approx(out["rt4"].total + r.f, abs=1e-9)


@given(st.floats(1e-6, 2.0), st.floats(1e-6, 2.0))
def test_obstacle_penalty_monotone(c1, c2):
    lo, hi = sorted((c1, c2))
    cfg = RewardConfig()
    assert obstacle_term(lo, cfg) <= obstacle_term(hi, cfg)


def test_identity_on_random_contexts():
    from convexnav.selftest import check_reward_identity

    assert check_reward_identity(1000).passed
