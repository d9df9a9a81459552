"""Core switch model: instances, the two-phase slot engine, traces, and text formats.

A shared-memory switch has N output queues drawing on one buffer of capacity B.
Each slot has an arrival phase (the policy picks a post-admission state that is
a subset of buffered-plus-arriving packets, total at most B) followed by a
transmission phase (every nonempty queue sends one packet).  Slot indices are
1-based; slot 0 carries only initial loads.

Quantities are exact: Python ints in integral mode, `fractions.Fraction` in
fractional mode.  Floating point is never used for buffer contents.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

Quantity = int | Fraction

MAX_BUFFER = 2**62


class SwmsimError(Exception):
    """Base class for package errors."""


class InstanceError(SwmsimError):
    """Malformed instance, schedule, or input file."""


class ContractError(SwmsimError):
    """A policy or trace violated the engine contract."""


class LimitError(SwmsimError):
    """A guarded size limit was exceeded."""


@dataclass(frozen=True)
class SwitchConfig:
    """Switch parameters: buffer size B and the queue-id budget.

    ``max_queues=None`` means unbounded queue ids (no recycling needed).
    """

    buffer_size: int
    max_queues: int | None = None

    def __post_init__(self):
        if not isinstance(self.buffer_size, int) or not (1 <= self.buffer_size <= MAX_BUFFER):
            raise InstanceError(f"buffer size must be an integer in [1, 2^62], got {self.buffer_size!r}")
        if self.max_queues is not None and self.max_queues < 1:
            raise InstanceError(f"max_queues must be positive or None, got {self.max_queues!r}")


@dataclass(frozen=True)
class QueueSpec:
    """One queue of a timeline instance.

    ``live`` is the closed arrival interval [b, e] (slots >= 1); on every slot
    in it the queue receives exactly B packets.  ``initial_load`` packets are
    delivered at slot 0.
    """

    queue: int
    live: tuple[int, int] | None = None
    initial_load: int = 0

    def __post_init__(self):
        if self.queue < 1:
            raise InstanceError(f"queue ids must be >= 1, got {self.queue}")
        if self.initial_load < 0:
            raise InstanceError(f"negative initial load for queue {self.queue}")
        if self.live is not None:
            b, e = self.live
            if b < 1 or e < b:
                raise InstanceError(
                    f"queue {self.queue}: live interval [{b}, {e}] must satisfy 1 <= b <= e"
                )

    @property
    def birth(self) -> int | None:
        if self.initial_load > 0:
            return 0
        return self.live[0] if self.live else None

    @property
    def death(self) -> int | None:
        """Slot of the last arrival (the queue is dying then, dead after)."""
        if self.live is not None:
            return self.live[1]
        return 0 if self.initial_load > 0 else None


class QueueTimeline:
    """Compact instance form: per queue a live interval plus an initial load."""

    def __init__(self, specs: Iterable[QueueSpec]):
        self.specs: dict[int, QueueSpec] = {}
        for spec in specs:
            if spec.queue in self.specs:
                raise InstanceError(f"duplicate queue id {spec.queue} in timeline")
            self.specs[spec.queue] = spec

    def __eq__(self, other):
        return isinstance(other, QueueTimeline) and self.specs == other.specs

    def __len__(self):
        return len(self.specs)

    def queues(self) -> list[int]:
        return sorted(self.specs)

    @property
    def duration(self) -> int:
        """Last slot with arrivals, 0 for an empty or load-only timeline."""
        return max((s.live[1] for s in self.specs.values() if s.live), default=0)

    def live_nondying_at(self, t: int) -> list[int]:
        out = []
        for q, s in sorted(self.specs.items()):
            b, d = s.birth, s.death
            if b is not None and b <= t < d:
                out.append(q)
        return out

    def dying_at(self, t: int) -> list[int]:
        return [q for q, s in sorted(self.specs.items()) if s.death == t]

    def dead_at(self, t: int) -> list[int]:
        return [q for q, s in sorted(self.specs.items()) if s.death is not None and s.death < t]

    def death_slots(self) -> dict[int, int]:
        return {q: s.death for q, s in self.specs.items() if s.death is not None}


class ArrivalSchedule:
    """Explicit per-slot, per-queue arrival counts.

    ``arrivals[t][q] = n`` with t >= 0; slot 0 entries are initial loads.  A
    schedule produced by :func:`expand` keeps a reference to its source
    timeline so simulations can classify queues as live/dying/dead.
    """

    def __init__(self, arrivals: Mapping[int, Mapping[int, int]], timeline: QueueTimeline | None = None):
        self._by_slot: dict[int, dict[int, int]] = {}
        for t, per_queue in arrivals.items():
            if t < 0:
                raise InstanceError(f"arrival slot {t} is negative")
            row = {}
            for q, n in per_queue.items():
                if q < 1:
                    raise InstanceError(f"queue ids must be >= 1, got {q}")
                if n < 0:
                    raise InstanceError(f"negative arrival count at slot {t}, queue {q}")
                if n > 0:
                    row[q] = n
            if row:
                self._by_slot[t] = row
        self.timeline = timeline

    @property
    def horizon(self) -> int:
        """Duration T: no packets arrive after this slot."""
        return max(self._by_slot, default=0)

    def has_initial_loads(self) -> bool:
        return 0 in self._by_slot

    def arrivals_at(self, t: int) -> dict[int, int]:
        return self._by_slot.get(t, {})

    def queues(self) -> list[int]:
        seen = set()
        for row in self._by_slot.values():
            seen.update(row)
        return sorted(seen)

    def total_arrivals(self) -> int:
        return sum(sum(row.values()) for row in self._by_slot.values())

    def slots(self) -> list[int]:
        return sorted(self._by_slot)

    def validate_against(self, config: SwitchConfig) -> None:
        for t, row in self._by_slot.items():
            for q, n in row.items():
                if n > config.buffer_size:
                    raise InstanceError(
                        f"slot {t}, queue {q}: {n} arrivals exceed the per-queue per-slot cap B={config.buffer_size}"
                    )
            if config.max_queues is not None:
                for q in row:
                    if q > config.max_queues:
                        raise InstanceError(f"queue id {q} exceeds max_queues={config.max_queues}")


def expand(timeline: QueueTimeline, config: SwitchConfig, drain_slots: int | None = None) -> ArrivalSchedule:
    """Expand a timeline to an explicit schedule: B arrivals per live slot.

    With bounded ``max_queues``, timeline queues are mapped onto physical ids,
    reusing an id only when its previous occupant has been dead for more than
    ``drain_slots`` slots (default B, which guarantees the old queue drained).
    """
    if drain_slots is None:
        drain_slots = config.buffer_size
    B = config.buffer_size

    if config.max_queues is None:
        mapping = {q: q for q in timeline.queues()}
        mapped = timeline
    else:
        # Greedy assignment in birth order; an id frees drain_slots after death.
        order = sorted(timeline.queues(), key=lambda q: (timeline.specs[q].birth is None,
                                                         timeline.specs[q].birth or 0, q))
        free_at: dict[int, int] = {}  # physical id -> first slot it may be reused
        mapping = {}
        for q in order:
            spec = timeline.specs[q]
            if spec.birth is None:
                continue
            phys = None
            for cand in range(1, config.max_queues + 1):
                if free_at.get(cand, 0) <= spec.birth:
                    phys = cand
                    break
            if phys is None:
                raise InstanceError(
                    f"queue recycling impossible at slot {spec.birth}: all {config.max_queues} "
                    f"ids are within {drain_slots} slots of a previous death"
                )
            mapping[q] = phys
            if spec.death is not None:
                free_at[phys] = spec.death + drain_slots + 1
        if len(set(mapping.values())) == len(mapping):
            mapped = QueueTimeline(
                QueueSpec(mapping[q], timeline.specs[q].live, timeline.specs[q].initial_load)
                for q in timeline.queues() if q in mapping
            )
        else:
            # a physical id hosts several logical lifetimes: liveness context
            # (b_t, a_t, dead-transmission split) is not well defined per id
            mapped = None

    arrivals: dict[int, dict[int, int]] = {}
    for q in timeline.queues():
        spec = timeline.specs[q]
        if spec.birth is None:
            continue
        phys = mapping[q]
        if spec.initial_load > 0:
            arrivals.setdefault(0, {})[phys] = arrivals.get(0, {}).get(phys, 0) + spec.initial_load
        if spec.live is not None:
            for t in range(spec.live[0], spec.live[1] + 1):
                arrivals.setdefault(t, {})[phys] = arrivals.get(t, {}).get(phys, 0) + B
    schedule = ArrivalSchedule(arrivals, timeline=mapped)
    schedule.validate_against(config)
    return schedule


# ---------------------------------------------------------------------------
# Simulation engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotTrace:
    slot: int
    transmitted: Quantity
    dying_acceptance: Quantity | None
    live_nondying: int | None
    total_occupancy: Quantity
    occupancy: dict[int, Quantity] | None = None


@dataclass
class SimulationResult:
    """Totals plus per-slot traces of one policy run."""

    policy: str
    total_transmitted: Quantity
    per_slot: list[SlotTrace]
    per_queue_transmitted: dict[int, Quantity]
    per_queue_dead_transmissions: dict[int, Quantity]
    total_arrivals: Quantity
    total_dropped: Quantity

    def transmitted_in(self, first_slot: int, last_slot: int) -> Quantity:
        return sum(r.transmitted for r in self.per_slot if first_slot <= r.slot <= last_slot)


def total_occupancy(state: Mapping[int, Quantity]) -> Quantity:
    return sum(state.values())


def transmit_step(state: Mapping[int, Quantity]) -> tuple[dict[int, Quantity], dict[int, Quantity]]:
    """One transmission phase: each nonempty queue sends min(1, occupancy)."""
    new_state: dict[int, Quantity] = {}
    sent: dict[int, Quantity] = {}
    for q, v in state.items():
        if v <= 0:
            continue
        tx = v if v < 1 else 1
        sent[q] = tx
        if v - tx > 0:
            new_state[q] = v - tx
    return new_state, sent


def _check_contract(old: Mapping[int, Quantity], arrivals: Mapping[int, int],
                    new: Mapping[int, Quantity], config: SwitchConfig,
                    fractional: bool, t: int) -> None:
    B = config.buffer_size
    for q, v in new.items():
        if v < 0:
            raise ContractError(f"slot {t}: policy produced negative occupancy for queue {q}")
        if not fractional and not isinstance(v, int):
            raise ContractError(f"slot {t}: non-integer occupancy {v!r} for queue {q} in integral mode")
        avail = old.get(q, 0) + arrivals.get(q, 0)
        if v > avail:
            raise ContractError(
                f"slot {t}: queue {q} post-admission {v} exceeds buffered+arriving {avail}"
            )
    if total_occupancy(new) > B:
        raise ContractError(f"slot {t}: post-admission total {total_occupancy(new)} exceeds B={B}")


def simulate(schedule: ArrivalSchedule, policy, config: SwitchConfig, *,
             record_occupancy: bool = False) -> SimulationResult:
    """Run a push-out policy over a schedule, then drain until the buffer empties.

    The policy proposes each slot's post-admission state; any contract breach
    (not a subset of buffered-plus-arriving, or total over B) is a hard error.
    """
    schedule.validate_against(config)
    policy.begin_run(schedule, config)
    timeline = schedule.timeline
    death = timeline.death_slots() if timeline is not None else {}

    state: dict[int, Quantity] = {}
    traces: list[SlotTrace] = []
    per_queue_tx: dict[int, Quantity] = {}
    dead_tx: dict[int, Quantity] = {}
    total_tx: Quantity = 0
    total_dropped: Quantity = 0

    T = schedule.horizon
    t = 0 if schedule.has_initial_loads() else 1
    drain_cap = T + config.buffer_size + 2
    while t <= T or state:
        if t > drain_cap:
            raise ContractError(f"buffer failed to drain by slot {drain_cap}")
        arrivals = schedule.arrivals_at(t)
        before = total_occupancy(state) + sum(arrivals.values())
        new_state = policy.admit(dict(state), dict(arrivals), t)
        new_state = {q: v for q, v in new_state.items() if v > 0}
        _check_contract(state, arrivals, new_state, config, getattr(policy, "fractional", False), t)
        total_dropped += before - total_occupancy(new_state)

        if timeline is not None:
            dying = timeline.dying_at(t)
            a_t = sum(new_state.get(q, 0) for q in dying) if dying else None
            b_t = len(timeline.live_nondying_at(t))
        else:
            a_t, b_t = None, None

        post_total = total_occupancy(new_state)
        state, sent = transmit_step(new_state)
        tx = sum(sent.values())
        total_tx += tx
        for q, v in sent.items():
            per_queue_tx[q] = per_queue_tx.get(q, 0) + v
            d = death.get(q)
            if d is not None and t >= d:
                dead_tx[q] = dead_tx.get(q, 0) + v

        traces.append(SlotTrace(
            slot=t,
            transmitted=tx,
            dying_acceptance=a_t,
            live_nondying=b_t,
            total_occupancy=post_total,
            occupancy=dict(new_state) if record_occupancy else None,
        ))
        t += 1

    return SimulationResult(
        policy=getattr(policy, "name", type(policy).__name__),
        total_transmitted=total_tx,
        per_slot=traces,
        per_queue_transmitted=per_queue_tx,
        per_queue_dead_transmissions=dead_tx,
        total_arrivals=schedule.total_arrivals(),
        total_dropped=total_dropped,
    )


@dataclass(frozen=True)
class RegularityViolation:
    slot: int
    kind: str  # "not-work-conserving" | "unforced-drop"
    detail: str


def check_regularity(result: SimulationResult, schedule: ArrivalSchedule,
                     config: SwitchConfig) -> list[RegularityViolation]:
    """Diagnose a trace against the regular-algorithm normal form.

    Regular means work-conserving (every nonempty queue transmits) and dropping
    only on overflow (drops happen only when buffered+arriving exceeds B, and
    then exactly down to B).  Requires occupancy snapshots in the trace.
    """
    violations = []
    prev_post: dict[int, Quantity] = {}
    B = config.buffer_size
    for row in result.per_slot:
        if row.occupancy is None:
            raise InstanceError("regularity check needs a trace recorded with occupancy snapshots")
        start, _ = transmit_step(prev_post) if prev_post else ({}, {})
        virtual = total_occupancy(start) + sum(schedule.arrivals_at(row.slot).values())
        allowed_drop = max(0, virtual - B)
        actual_drop = virtual - row.total_occupancy
        if actual_drop > allowed_drop:
            violations.append(RegularityViolation(
                row.slot, "unforced-drop",
                f"dropped {actual_drop} with buffered+arriving {virtual} (forced: {allowed_drop})",
            ))
        expected_tx = sum(v if v < 1 else 1 for v in row.occupancy.values() if v > 0)
        if row.transmitted != expected_tx:
            violations.append(RegularityViolation(
                row.slot, "not-work-conserving",
                f"transmitted {row.transmitted} from {expected_tx} nonempty queues",
            ))
        prev_post = row.occupancy
    return violations


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------

def format_instance(config: SwitchConfig, instance: QueueTimeline | ArrivalSchedule,
                    meta: Mapping[str, object] | None = None) -> str:
    """Serialize an instance to the line-based text format."""
    lines = []
    if meta:
        for key in sorted(meta):
            lines.append(f"# meta {key}={meta[key]}")
    n = "auto" if config.max_queues is None else str(config.max_queues)
    lines.append(f"switch B={config.buffer_size} N={n}")
    if isinstance(instance, QueueTimeline):
        for q in instance.queues():
            spec = instance.specs[q]
            parts = [f"queue {q}"]
            if spec.live is not None:
                parts.append(f"live={spec.live[0]}..{spec.live[1]}")
            if spec.initial_load:
                parts.append(f"init={spec.initial_load}")
            lines.append(" ".join(parts))
    elif isinstance(instance, ArrivalSchedule):
        for t in instance.slots():
            row = instance.arrivals_at(t)
            for q in sorted(row):
                lines.append(f"arrive t={t} q={q} n={row[q]}")
    else:
        raise InstanceError(f"cannot serialize {type(instance).__name__}")
    return "\n".join(lines) + "\n"


def _parse_kv(tokens: list[str], line_no: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise InstanceError(f"line {line_no}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def parse_instance(text: str) -> tuple[SwitchConfig, QueueTimeline | ArrivalSchedule, dict[str, str]]:
    """Parse the instance text format.

    Returns (config, instance, meta).  The timeline (`queue` lines) and raw
    (`arrive` lines) forms must not be mixed in one file.
    """
    config = None
    specs: list[QueueSpec] = []
    arrivals: dict[int, dict[int, int]] = {}
    meta: dict[str, str] = {}
    saw_queue = saw_arrive = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("# meta "):
            kv = _parse_kv(line[len("# meta "):].split(), line_no)
            meta.update(kv)
            continue
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "switch":
                kv = _parse_kv(tokens[1:], line_no)
                n = None if kv.get("N", "auto") == "auto" else int(kv["N"])
                config = SwitchConfig(buffer_size=int(kv["B"]), max_queues=n)
            elif kind == "queue":
                saw_queue = True
                qid = int(tokens[1])
                kv = _parse_kv(tokens[2:], line_no)
                live = None
                if "live" in kv:
                    b, e = kv["live"].split("..")
                    live = (int(b), int(e))
                specs.append(QueueSpec(qid, live, int(kv.get("init", "0"))))
            elif kind == "arrive":
                saw_arrive = True
                kv = _parse_kv(tokens[1:], line_no)
                t, q, n = int(kv["t"]), int(kv["q"]), int(kv["n"])
                arrivals.setdefault(t, {})[q] = arrivals.get(t, {}).get(q, 0) + n
            else:
                raise InstanceError(f"line {line_no}: unknown directive {kind!r}")
        except (ValueError, KeyError, IndexError) as exc:
            raise InstanceError(f"line {line_no}: cannot parse {line!r} ({exc})") from exc

    if config is None:
        raise InstanceError("missing 'switch' line")
    if saw_queue and saw_arrive:
        raise InstanceError("timeline ('queue') and raw ('arrive') forms must not be mixed")
    if saw_arrive:
        schedule = ArrivalSchedule(arrivals)
        schedule.validate_against(config)
        return config, schedule, meta
    return config, QueueTimeline(specs), meta


def _fmt_quantity(v: Quantity | None) -> str:
    if v is None:
        return ""
    return str(v)


def trace_csv(result: SimulationResult, *, version_comment: bool = True) -> str:
    """Render the per-slot trace as CSV: slot,transmitted,a_t,b_t,total_occupancy."""
    buf = io.StringIO()
    if version_comment:
        buf.write("# swmsim-csv v1\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["slot", "transmitted", "a_t", "b_t", "total_occupancy"])
    for row in result.per_slot:
        writer.writerow([
            row.slot,
            _fmt_quantity(row.transmitted),
            _fmt_quantity(row.dying_acceptance),
            "" if row.live_nondying is None else row.live_nondying,
            _fmt_quantity(row.total_occupancy),
        ])
    return buf.getvalue()
