"""Core model: instance types, expansion, the slot engine, regularity, formats."""

import random
from fractions import Fraction

import pytest

from swmsim.model import (
    ArrivalSchedule,
    ContractError,
    InstanceError,
    QueueSpec,
    QueueTimeline,
    SimulationResult,
    SlotTrace,
    SwitchConfig,
    check_regularity,
    expand,
    format_instance,
    parse_instance,
    simulate,
    trace_csv,
)
from swmsim.policies import LqdPolicy, FractionalLqdPolicy


def fig3_timeline():
    return QueueTimeline([QueueSpec(1, (1, 2)), QueueSpec(2, (2, 4)), QueueSpec(3, (3, 6))])


def test_switch_config_validation():
    assert SwitchConfig(1).buffer_size == 1
    SwitchConfig(2**62)
    with pytest.raises(InstanceError):
        SwitchConfig(0)
    with pytest.raises(InstanceError):
        SwitchConfig(2**62 + 1)
    with pytest.raises(InstanceError):
        SwitchConfig(5, max_queues=0)


def test_queue_spec_validation():
    with pytest.raises(InstanceError):
        QueueSpec(1, (0, 3))
    with pytest.raises(InstanceError):
        QueueSpec(1, (4, 3))
    with pytest.raises(InstanceError):
        QueueSpec(0, (1, 2))
    with pytest.raises(InstanceError):
        QueueSpec(1, None, initial_load=-1)


def test_timeline_roles():
    tl = QueueTimeline([QueueSpec(1, (1, 3)), QueueSpec(2, None, initial_load=4),
                        QueueSpec(3, (2, 2), initial_load=5)])
    assert tl.specs[1].birth == 1 and tl.specs[1].death == 3
    assert tl.specs[2].birth == 0 and tl.specs[2].death == 0
    assert tl.specs[3].birth == 0 and tl.specs[3].death == 2
    assert tl.live_nondying_at(1) == [1, 3]
    assert tl.dying_at(3) == [1]
    assert tl.dead_at(1) == [2]
    with pytest.raises(InstanceError):
        QueueTimeline([QueueSpec(1, (1, 1)), QueueSpec(1, (2, 2))])


def test_expand_places_b_arrivals_per_live_slot():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    assert sched.arrivals_at(1) == {1: 6}
    assert sched.arrivals_at(2) == {1: 6, 2: 6}
    assert sched.arrivals_at(5) == {3: 6}
    assert sched.horizon == 6
    assert sched.total_arrivals() == 6 * (2 + 3 + 4)


def test_expand_empty_timeline():
    sched = expand(QueueTimeline([]), SwitchConfig(4))
    assert sched.horizon == 0
    assert sched.total_arrivals() == 0


def test_expand_initial_loads_at_slot_zero():
    tl = QueueTimeline([QueueSpec(1, None, initial_load=3), QueueSpec(2, (1, 1))])
    sched = expand(tl, SwitchConfig(5))
    assert sched.arrivals_at(0) == {1: 3}
    assert sched.has_initial_loads()


def test_expand_recycles_queue_ids():
    # two queues far enough apart share one physical id
    tl = QueueTimeline([QueueSpec(1, (1, 1)), QueueSpec(2, (10, 10))])
    cfg = SwitchConfig(3, max_queues=1)
    sched = expand(tl, cfg, drain_slots=3)
    assert sched.queues() == [1]
    assert sched.arrivals_at(1) == {1: 3}
    assert sched.arrivals_at(10) == {1: 3}


def test_expand_recycling_conflict_is_explicit():
    tl = QueueTimeline([QueueSpec(1, (1, 4)), QueueSpec(2, (2, 5))])
    with pytest.raises(InstanceError, match="slot 2"):
        expand(tl, SwitchConfig(3, max_queues=1))


def test_arrival_cap_is_validated():
    sched = ArrivalSchedule({1: {1: 7}})
    with pytest.raises(InstanceError, match="cap"):
        sched.validate_against(SwitchConfig(6))


def test_simulate_empty_schedule_transmits_nothing():
    cfg = SwitchConfig(4)
    result = simulate(ArrivalSchedule({}), LqdPolicy(), cfg)
    assert result.total_transmitted == 0
    assert result.per_slot == []


def test_simulate_records_conservation():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    result = simulate(sched, LqdPolicy(), cfg)
    assert result.total_transmitted + result.total_dropped == result.total_arrivals
    assert result.total_transmitted == sum(r.transmitted for r in result.per_slot)
    assert result.total_transmitted == sum(result.per_queue_transmitted.values())


def test_simulate_is_deterministic_byte_for_byte():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    a = trace_csv(simulate(sched, LqdPolicy(), cfg))
    b = trace_csv(simulate(sched, LqdPolicy(), cfg))
    assert a == b


def test_simulate_dead_transmission_accounting():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    result = simulate(sched, LqdPolicy(), cfg, record_occupancy=True)
    death = {1: 2, 2: 4, 3: 6}
    recount = {}
    prev = {}
    for row in result.per_slot:
        for q, v in row.occupancy.items():
            if row.slot >= death[q] and v > 0:
                recount[q] = recount.get(q, 0) + 1
        prev = row.occupancy
    assert recount == result.per_queue_dead_transmissions


class _OverfullPolicy:
    clairvoyant = False
    fractional = False
    name = "overfull"

    def begin_run(self, schedule, config):
        pass

    def admit(self, state, arrivals, t):
        out = dict(state)
        for q, n in arrivals.items():
            out[q] = out.get(q, 0) + n
        return out


class _InventingPolicy(_OverfullPolicy):
    name = "inventing"

    def admit(self, state, arrivals, t):
        return {1: 1, 99: 1}


def test_contract_violations_are_hard_errors():
    cfg = SwitchConfig(3)
    sched = ArrivalSchedule({1: {1: 3, 2: 3}})
    with pytest.raises(ContractError, match="exceeds B"):
        simulate(sched, _OverfullPolicy(), cfg)
    with pytest.raises(ContractError, match="queue 99"):
        simulate(ArrivalSchedule({1: {1: 2}}), _InventingPolicy(), cfg)


def test_fractional_transmission_step():
    cfg = SwitchConfig(3)
    sched = ArrivalSchedule({1: {1: 2, 2: 2}})
    result = simulate(sched, FractionalLqdPolicy(), cfg)
    # level 3/2 per queue, then each queue sends min(1, occupancy)
    assert result.per_slot[0].transmitted == 2
    assert result.per_slot[0].total_occupancy == 3
    assert result.total_transmitted == 3


def test_regularity_lqd_run_is_clean():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    result = simulate(sched, LqdPolicy(), cfg, record_occupancy=True)
    assert check_regularity(result, sched, cfg) == []


def test_regularity_needs_snapshots():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    result = simulate(sched, LqdPolicy(), cfg)
    with pytest.raises(InstanceError, match="snapshots"):
        check_regularity(result, sched, cfg)


def _synthetic_result(rows):
    return SimulationResult(
        policy="synthetic", total_transmitted=sum(r.transmitted for r in rows),
        per_slot=rows, per_queue_transmitted={}, per_queue_dead_transmissions={},
        total_arrivals=0, total_dropped=0)


def test_regularity_flags_idle_nonempty_queue():
    cfg = SwitchConfig(4)
    sched = ArrivalSchedule({1: {1: 2}})
    rows = [SlotTrace(slot=1, transmitted=0, dying_acceptance=None, live_nondying=None,
                      total_occupancy=2, occupancy={1: 2})]
    violations = check_regularity(_synthetic_result(rows), sched, cfg)
    assert [v.kind for v in violations] == ["not-work-conserving"]


def test_regularity_flags_unforced_drop():
    cfg = SwitchConfig(4)
    sched = ArrivalSchedule({1: {1: 4}})
    rows = [SlotTrace(slot=1, transmitted=1, dying_acceptance=None, live_nondying=None,
                      total_occupancy=3, occupancy={1: 3})]
    violations = check_regularity(_synthetic_result(rows), sched, cfg)
    assert [v.kind for v in violations] == ["unforced-drop"]


def test_instance_text_round_trip_timeline():
    cfg = SwitchConfig(6, max_queues=8)
    tl = QueueTimeline([QueueSpec(1, (1, 2)), QueueSpec(2, None, initial_load=5),
                        QueueSpec(3, (2, 4), initial_load=6)])
    text = format_instance(cfg, tl, meta={"family": "demo", "x": 1})
    cfg2, tl2, meta = parse_instance(text)
    assert cfg2 == cfg
    assert tl2 == tl
    assert meta == {"family": "demo", "x": "1"}
    assert format_instance(cfg2, tl2, meta={"family": "demo", "x": 1}) == text


def test_instance_text_round_trip_schedule():
    cfg = SwitchConfig(4)
    sched = ArrivalSchedule({1: {1: 2}, 3: {2: 4, 1: 1}})
    text = format_instance(cfg, sched)
    cfg2, sched2, _ = parse_instance(text)
    assert isinstance(sched2, ArrivalSchedule)
    assert sched2.arrivals_at(3) == {1: 1, 2: 4}
    assert format_instance(cfg2, sched2) == text


def test_instance_text_rejects_mixed_forms():
    text = "switch B=4 N=auto\nqueue 1 live=1..2\narrive t=1 q=1 n=2\n"
    with pytest.raises(InstanceError, match="must not be mixed"):
        parse_instance(text)


def test_instance_text_errors_name_lines():
    with pytest.raises(InstanceError, match="line 2"):
        parse_instance("switch B=4 N=auto\nqueue one live=1..2\n")
    with pytest.raises(InstanceError, match="switch"):
        parse_instance("# nothing\n")


def test_trace_csv_schema():
    cfg = SwitchConfig(6)
    sched = expand(fig3_timeline(), cfg)
    text = trace_csv(simulate(sched, LqdPolicy(), cfg))
    lines = text.splitlines()
    assert lines[0] == "# swmsim-csv v1"
    assert lines[1] == "slot,transmitted,a_t,b_t,total_occupancy"
    assert lines[2] == "1,1,,1,6"  # slot 1: Q1 live non-dying; nobody dying
    assert lines[3] == "2,2,3,1,6"  # Q1 dying, water-filled to the level 3


def test_occupancy_cap_holds_every_slot():
    rng = random.Random(7)
    for _ in range(20):
        cfg = SwitchConfig(rng.randint(1, 5))
        arr = {}
        for t in range(1, 6):
            for q in range(1, 4):
                n = rng.randint(0, cfg.buffer_size)
                if n:
                    arr.setdefault(t, {})[q] = n
        sched = ArrivalSchedule(arr)
        for policy in (LqdPolicy(), FractionalLqdPolicy()):
            result = simulate(sched, policy, cfg)
            assert all(r.total_occupancy <= cfg.buffer_size for r in result.per_slot)
