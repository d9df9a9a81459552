"""Vectorized family runners cross-checked against the generic engine."""

import numpy as np
import pytest

from swmsim import fast
from swmsim.instances import PhiKParams, StaircaseParams, phi_k_instance, staircase_instance
from swmsim.model import LimitError, SwitchConfig, expand, simulate
from swmsim.policies import (
    LateQdAggregatePolicy,
    LqdPolicy,
    StaircaseOfflinePolicy,
    waterfill_int,
)


def test_waterfill_level_matches_exact_waterfill():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        vals = rng.integers(0, 50, size=n)
        budget = int(rng.integers(1, 120))
        if int(vals.sum()) <= budget:
            continue
        level, rem = fast.waterfill_level_int(vals, budget)
        virtual = {i + 1: int(v) for i, v in enumerate(vals)}
        exact = waterfill_int(virtual, budget)
        exact_level = max((v for v in exact.values()), default=0)
        filled = sum(min(v, level) for v in virtual.values())
        assert filled + rem == budget
        assert rem >= 0
        assert exact_level in (level, level + 1)


@pytest.mark.parametrize("policy", ["lqd", "offline"])
@pytest.mark.parametrize("B,a,horizon", [(98, 10, 20), (100, 10, 15), (25, 3, 12)])
def test_staircase_fast_matches_engine(policy, B, a, horizon):
    params = StaircaseParams(B=B, a=a, horizon=horizon)
    tl = staircase_instance(params)
    cfg = SwitchConfig(B)
    sched = expand(tl, cfg)
    if policy == "lqd":
        pol = LqdPolicy()
    else:
        pol = StaircaseOfflinePolicy(tl, params.a, params.h, params.p)
    engine = simulate(sched, pol, cfg)
    run = fast.run_staircase(params, policy, slots=horizon)
    assert run.total == engine.total_transmitted
    assert list(run.per_slot_tx) == [r.transmitted for r in engine.per_slot]


@pytest.mark.parametrize("policy", ["lqd", "lateqd"])
@pytest.mark.parametrize("k,B,cycles", [(4, 6, 2), (5, 12, 3), (8, 20, 3), (3, 3, 4)])
def test_phi_k_fast_matches_engine(policy, k, B, cycles):
    params = PhiKParams(k=k, B=B, cycles=cycles)
    tl = phi_k_instance(params)
    cfg = SwitchConfig(B)
    sched = expand(tl, cfg)
    pol = LqdPolicy() if policy == "lqd" else LateQdAggregatePolicy(tl)
    engine = simulate(sched, pol, cfg, record_occupancy=False)
    run = fast.run_phi_k(params, policy)
    assert run.total == engine.total_transmitted
    assert list(run.per_slot_tx) == [r.transmitted for r in engine.per_slot]
    assert run.dead_transmissions == engine.per_queue_dead_transmissions
    engine_a = {r.slot: r.dying_acceptance for r in engine.per_slot
                if r.dying_acceptance is not None}
    assert run.accepted_at_death == engine_a


def test_phi_k_fast_tie_break_matches_engine():
    params = PhiKParams(k=4, B=6, cycles=2)
    tl = phi_k_instance(params)
    cfg = SwitchConfig(6)
    sched = expand(tl, cfg)
    for prefer_low in (True, False):
        engine = simulate(sched, LqdPolicy(prefer_low_ids=prefer_low), cfg)
        run = fast.run_phi_k(params, "lqd", prefer_low_ids=prefer_low)
        assert run.total == engine.total_transmitted


def test_fast_scale_guard():
    with pytest.raises(LimitError, match="int64"):
        fast.run_phi_k(PhiKParams(k=2, B=2**61, cycles=1), "lqd")


def test_family_run_window_sums():
    run = fast.run_phi_k(PhiKParams(k=4, B=6, cycles=2), "lqd")
    assert run.tx_in(1, 10**9) == run.total
    assert run.tx_in(1, 4) + run.tx_in(5, 10**9) == run.total
