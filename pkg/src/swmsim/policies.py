"""Push-out policies: LQD (integral and fractional), the clairvoyant LateQD in
packet-level and aggregate forms, the offline staircase policy, and an exact
brute-force optimum for small instances.

Every policy is a state transformer: given the buffered occupancies, this
slot's arrivals, and the slot index, it returns the post-admission occupancies
(a subset of buffered-plus-arriving with total at most B).  The engine owns
transmission.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .model import (
    ArrivalSchedule,
    ContractError,
    InstanceError,
    LimitError,
    QueueTimeline,
    Quantity,
    SwitchConfig,
)


# ---------------------------------------------------------------------------
# Water-filling
# ---------------------------------------------------------------------------

def waterfill_int(virtual: Mapping[int, int], budget: int, *, prefer_low_ids: bool = True) -> dict[int, int]:
    """Equalize integer occupancies under a budget.

    Finds the largest level L with sum(min(v, L)) <= budget, truncates every
    queue to L, then hands the remaining budget out one packet each to queues
    above the level -- in ascending id order by default (equivalently: the
    remainder packet is dropped from the highest ids).
    """
    total = sum(virtual.values())
    if total <= budget:
        return {q: v for q, v in virtual.items() if v > 0}
    vals = sorted(virtual.values())

    def filled(level: int) -> int:
        return sum(v if v < level else level for v in vals)

    lo, hi = 0, vals[-1]
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if filled(mid) <= budget:
            lo = mid
        else:
            hi = mid - 1
    level = lo
    out = {q: min(v, level) for q, v in virtual.items()}
    rem = budget - sum(out.values())
    order = sorted(virtual) if prefer_low_ids else sorted(virtual, reverse=True)
    for q in order:
        if rem == 0:
            break
        if virtual[q] > level:
            out[q] += 1
            rem -= 1
    return {q: v for q, v in out.items() if v > 0}


def waterfill_frac(virtual: Mapping[int, Quantity], budget: Quantity) -> dict[int, Fraction]:
    """Exact-rational water-filling: the level L solves sum(min(v, L)) = budget."""
    vals = sorted(Fraction(v) for v in virtual.values())
    total = sum(vals)
    if total <= budget:
        return {q: Fraction(v) for q, v in virtual.items() if v > 0}
    # Walk the sorted values: with i queues fully below the level, the level is
    # (budget - sum_below) / (n - i), valid while it stays under the next value.
    n = len(vals)
    below = Fraction(0)
    for i in range(n):
        level = Fraction(budget - below, n - i)
        if level <= vals[i]:
            break
        below += vals[i]
    else:
        level = Fraction(budget - below, 1)
    out = {q: min(Fraction(v), level) for q, v in virtual.items()}
    return {q: v for q, v in out.items() if v > 0}


# ---------------------------------------------------------------------------
# LQD
# ---------------------------------------------------------------------------

def lqd_admit(state: Mapping[int, int], arrivals: Mapping[int, int], buffer_size: int,
              *, prefer_low_ids: bool = True) -> dict[int, int]:
    virtual = dict(state)
    for q, n in arrivals.items():
        virtual[q] = virtual.get(q, 0) + n
    return waterfill_int(virtual, buffer_size, prefer_low_ids=prefer_low_ids)


def lqd_fractional_admit(state: Mapping[int, Quantity], arrivals: Mapping[int, int],
                         buffer_size: int) -> dict[int, Fraction]:
    virtual: dict[int, Quantity] = {q: Fraction(v) for q, v in state.items()}
    for q, n in arrivals.items():
        virtual[q] = virtual.get(q, Fraction(0)) + n
    return waterfill_frac(virtual, buffer_size)


class LqdPolicy:
    """Longest Queue Drop: on overflow, push out of the longest queues."""

    clairvoyant = False
    fractional = False

    def __init__(self, prefer_low_ids: bool = True):
        self.prefer_low_ids = prefer_low_ids
        self.name = "lqd"

    def begin_run(self, schedule, config: SwitchConfig):
        self._B = config.buffer_size

    def admit(self, state, arrivals, t):
        return lqd_admit(state, arrivals, self._B, prefer_low_ids=self.prefer_low_ids)


class FractionalLqdPolicy:
    """LQD with fractional push-out: several longest queues shed fractions."""

    clairvoyant = False
    fractional = True
    name = "lqd-frac"

    def begin_run(self, schedule, config: SwitchConfig):
        self._B = config.buffer_size

    def admit(self, state, arrivals, t):
        return lqd_fractional_admit(state, arrivals, self._B)


# ---------------------------------------------------------------------------
# Exit times under an infinite buffer (LateQD priorities)
# ---------------------------------------------------------------------------

@dataclass
class PacketPriorityMap:
    """Provisional exit slots under B=infinity with LIFO service.

    ``exit_times[q][t]`` lists the exit slots of the packets queue q receives
    at slot t, in push order (the last entry is popped first).
    """

    exit_times: dict[int, dict[int, list[int]]]

    def queue_exits(self, q: int) -> list[int]:
        out = []
        for t in sorted(self.exit_times.get(q, {})):
            out.extend(self.exit_times[q][t])
        return sorted(out)


def compute_exit_times(schedule: ArrivalSchedule, *, packet_limit: int = 10**7) -> PacketPriorityMap:
    """Run the infinite-buffer LIFO system and record every packet's exit slot.

    Arrival phases push that slot's packets (last pushed pops first);
    each transmission phase pops one packet per nonempty queue.
    """
    if schedule.total_arrivals() > packet_limit:
        raise LimitError(
            f"{schedule.total_arrivals()} packets exceed the per-packet limit {packet_limit}; "
            "use the aggregate clairvoyant form for timeline instances"
        )
    exit_times: dict[int, dict[int, list[int]]] = {}
    stacks: dict[int, list[tuple[int, int]]] = {}  # q -> [(arrival_slot, index)]
    T = schedule.horizon
    t = 0 if schedule.has_initial_loads() else 1
    while t <= T or any(stacks.values()):
        for q, n in sorted(schedule.arrivals_at(t).items()):
            lst = exit_times.setdefault(q, {}).setdefault(t, [0] * n)
            stack = stacks.setdefault(q, [])
            for i in range(n):
                stack.append((t, i))
        for q in sorted(stacks):
            stack = stacks[q]
            if stack:
                slot, idx = stack.pop()
                exit_times[q][slot][idx] = t
        t += 1
    return PacketPriorityMap(exit_times)


# ---------------------------------------------------------------------------
# LateQD, packet level
# ---------------------------------------------------------------------------

class LateQdPacketPolicy:
    """Clairvoyant optimum: push out the buffered packet with the latest
    provisional exit slot (ties: larger queue id, then later arrival).

    Keeps an internal per-queue stack of exit times mirroring the engine's
    buffer; within a queue exit times decrease toward the top, so the bottom
    packet is the push-out candidate and the top is the one transmitted.
    """

    clairvoyant = True
    fractional = False
    name = "lateqd"

    def __init__(self, priorities: PacketPriorityMap | None = None, packet_limit: int = 10**7):
        self._given = priorities
        self._packet_limit = packet_limit

    def begin_run(self, schedule, config: SwitchConfig):
        self._B = config.buffer_size
        self._prio = self._given or compute_exit_times(schedule, packet_limit=self._packet_limit)
        self._stacks: dict[int, list[tuple[int, int, int]]] = {}  # q -> [(e, slot, i)]
        self._pending_tx = False

    def _replay_transmission(self):
        for q in list(self._stacks):
            st = self._stacks[q]
            if st:
                st.pop()
            if not st:
                del self._stacks[q]

    def admit(self, state, arrivals, t):
        if self._pending_tx:
            self._replay_transmission()
        self._pending_tx = True
        for q, n in sorted(arrivals.items()):
            exits = self._prio.exit_times[q][t]
            st = self._stacks.setdefault(q, [])
            for i in range(n):
                st.append((exits[i], t, i))
        total = sum(len(s) for s in self._stacks.values())
        while total > self._B:
            victim = None
            for q, st in self._stacks.items():
                e, slot, i = st[0]  # bottom holds the latest exit
                key = (e, q, slot, i)
                if victim is None or key > victim:
                    victim = key
            q = victim[1]
            self._stacks[q].pop(0)
            if not self._stacks[q]:
                del self._stacks[q]
            total -= 1
        return {q: len(st) for q, st in self._stacks.items()}


# ---------------------------------------------------------------------------
# LateQD, aggregate form (timeline instances)
# ---------------------------------------------------------------------------

class LateQdAggregatePolicy:
    """Count-level clairvoyant optimum for timeline instances.

    Per slot: if more queues could be nonempty than the buffer holds, keep one
    packet in each of the B lowest ids; otherwise keep exactly one packet per
    live non-dying queue and water-fill the dead and dying queues with the
    remaining budget.  Transmits the same packet set as the packet-level form.
    """

    clairvoyant = True
    fractional = False
    name = "lateqd-aggregate"

    def __init__(self, timeline: QueueTimeline):
        for q, spec in timeline.specs.items():
            if spec.initial_load > 0 and spec.live is not None and spec.live[0] > 1:
                raise InstanceError(
                    f"queue {q}: initial load with a live interval starting after slot 1 "
                    "is outside the aggregate form"
                )
        self.timeline = timeline

    def begin_run(self, schedule, config: SwitchConfig):
        if schedule.timeline is not self.timeline and schedule.timeline != self.timeline:
            raise InstanceError("aggregate clairvoyant policy needs the instance in timeline form")
        self._B = config.buffer_size

    def admit(self, state, arrivals, t):
        B = self._B
        nonempty = {q for q, v in state.items() if v > 0} | {q for q, n in arrivals.items() if n > 0}
        if len(nonempty) > B:
            keep = sorted(nonempty)[:B]
            return {q: 1 for q in keep}
        live = [q for q in self.timeline.live_nondying_at(t)
                if state.get(q, 0) + arrivals.get(q, 0) >= 1]
        out = {q: 1 for q in live}
        budget = B - len(live)
        rest: dict[int, int] = {}
        for q in nonempty:
            if q in out:
                continue
            virtual = state.get(q, 0) + arrivals.get(q, 0)
            rest[q] = min(virtual, B)
        out.update(waterfill_int(rest, budget))
        return out


# ---------------------------------------------------------------------------
# Offline staircase policy
# ---------------------------------------------------------------------------

class StaircaseOfflinePolicy:
    """Clairvoyant non-push-out policy for the staircase family.

    Keeps one packet in every live queue, accepts p packets from the dying
    queue (p = max{w : w(w+1)/2 <= B - a}), and never pushes out accepted
    packets.  From slot p on it transmits a+p packets per slot.

    Queue roles come from the family structure (queue j > h dies at slot j-h),
    so a horizon-truncated instance leaves the tail cohort in the live role.
    """

    clairvoyant = True
    fractional = False
    name = "staircase-offline"

    def __init__(self, timeline: QueueTimeline, a: int, h: int, p: int):
        self.timeline = timeline
        self.a = a
        self.h = h
        self.p = p

    def begin_run(self, schedule, config: SwitchConfig):
        if schedule.timeline != self.timeline:
            raise InstanceError("offline staircase policy applied to a different schedule")
        self._B = config.buffer_size

    def admit(self, state, arrivals, t):
        out = dict(state)  # accepted packets are never pushed out
        for q, n in sorted(arrivals.items()):
            if t == 0:
                if q < self.h:
                    out[q] = n  # dead-ramp loads all fit: j < h < p
                elif q == self.h:
                    out[q] = min(n, self.p)
                else:
                    out[q] = 1
            elif q <= self.h:
                raise ContractError(f"slot {t}: queue {q} of the dead ramp received arrivals")
            elif q - self.h == t:
                out[q] = min(state.get(q, 0) + n, self.p)
            elif q - self.h > t:
                out[q] = max(state.get(q, 0), 1)
            else:
                raise ContractError(f"slot {t}: arrivals to dead queue {q}")
        if sum(out.values()) > self._B:
            raise ContractError(
                f"slot {t}: staircase policy out of memory; parameters do not fit this instance"
            )
        return {q: v for q, v in out.items() if v > 0}


# ---------------------------------------------------------------------------
# Brute-force optimum over regular algorithms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceLimits:
    max_packets: int = 24
    max_queues: int = 5
    max_horizon: int = 8


def brute_force_opt(schedule: ArrivalSchedule, config: SwitchConfig,
                    limits: BruteForceLimits = BruteForceLimits()) -> int:
    """Exact maximum transmitted packets over all regular push-out strategies.

    Depth-first search over per-overflow drop choices, memoized on
    (slot, occupancy vector).  Work conservation makes drain slots contribute
    exactly the packets left at the horizon.
    """
    queues = schedule.queues()
    T = schedule.horizon
    if schedule.total_arrivals() > limits.max_packets:
        raise LimitError(f"instance has {schedule.total_arrivals()} packets > limit {limits.max_packets}")
    if len(queues) > limits.max_queues:
        raise LimitError(f"instance has {len(queues)} queues > limit {limits.max_queues}")
    if T > limits.max_horizon:
        raise LimitError(f"instance horizon {T} > limit {limits.max_horizon}")
    B = config.buffer_size
    arrivals_by_slot = {t: schedule.arrivals_at(t) for t in range(0, T + 1)}
    n = len(queues)

    def overflow_states(v: tuple[int, ...]):
        # all o with 0 <= o_i <= v_i and sum(o) == B
        def rec(i, left):
            if i == n:
                if left == 0:
                    yield ()
                return
            tail_cap = sum(v[i + 1:])
            lo = max(0, left - tail_cap)
            hi = min(v[i], left)
            for x in range(lo, hi + 1):
                for rest in rec(i + 1, left - x):
                    yield (x,) + rest
        return rec(0, B)

    @lru_cache(maxsize=None)
    def best_from(t: int, state: tuple[int, ...]) -> int:
        if t > T:
            return sum(state)  # everything left drains, one packet per queue per slot
        arr = arrivals_by_slot.get(t, {})
        v = tuple(state[i] + arr.get(q, 0) for i, q in enumerate(queues))
        if sum(v) <= B:
            candidates = (v,)
        else:
            candidates = overflow_states(v)
        best = 0
        for o in candidates:
            tx = sum(1 for x in o if x > 0)
            nxt = tuple(x - 1 if x > 0 else 0 for x in o)
            best = max(best, tx + best_from(t + 1, nxt))
        return best

    start = 0 if schedule.has_initial_loads() else 1
    result = best_from(start, tuple(0 for _ in queues))
    best_from.cache_clear()
    return result


# ---------------------------------------------------------------------------
# Policy registry
# ---------------------------------------------------------------------------

def make_policy(name: str, *, timeline: QueueTimeline | None = None,
                staircase_params=None):
    """Build a policy by CLI name; clairvoyant aggregate forms need the timeline."""
    if name == "lqd":
        return LqdPolicy()
    if name == "lqd-frac":
        return FractionalLqdPolicy()
    if name == "lateqd":
        return LateQdPacketPolicy()
    if name == "lateqd-aggregate":
        if timeline is None:
            raise InstanceError("lateqd-aggregate needs an instance in timeline form")
        return LateQdAggregatePolicy(timeline)
    if name == "staircase-offline":
        if timeline is None or staircase_params is None:
            raise InstanceError("staircase-offline needs a staircase timeline and its parameters")
        return StaircaseOfflinePolicy(timeline, staircase_params.a, staircase_params.h,
                                      staircase_params.p)
    raise InstanceError(f"unknown policy {name!r}")
