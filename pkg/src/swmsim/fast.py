"""Vectorized runners for the structured instance families.

These reimplement the per-slot dynamics of LQD, the aggregate clairvoyant
policy, and the offline staircase policy directly over numpy arrays, using the
fact that in both families the queues receiving arrivals at any slot form one
contiguous id range and queues die in id order.  They are cross-checked
against the generic engine in the test suite; their purpose is to make
desk-scale parameter sweeps fast.

int64 arithmetic only: callers whose B could overflow the level search must
use the exact engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import PhiKParams, StaircaseParams
from .model import LimitError

_INT64_SAFE = 2**60


def _check_scale(B: int, n: int):
    if (B + 1) * (n + 2) >= _INT64_SAFE:
        raise LimitError(f"B={B} with {n} queues exceeds the int64 fast path; use the exact engine")


def waterfill_level_int(values: np.ndarray, budget: int) -> tuple[int, int]:
    """Largest integer level L with sum(min(v, L)) <= budget, plus the remainder.

    Assumes sum(values) > budget; zeros in ``values`` are ignored.
    """
    v = np.sort(values[values > 0])
    n = v.size
    s = np.concatenate(([0], np.cumsum(v)))
    filled_at = s[:-1] + (n - np.arange(n)) * v  # filled() at level v[i], nondecreasing
    i = int(np.searchsorted(filled_at, budget, side="right"))
    if i >= n:
        return int(v[-1]), int(budget - s[-1])
    level = int((budget - s[i]) // (n - i))
    rem = int(budget - (s[i] + (n - i) * level))
    return level, rem


def waterfill_array(virtual: np.ndarray, budget: int, prefer_low_ids: bool = True) -> np.ndarray:
    """Integer water-fill over an id-indexed array; remainder to lowest ids by
    default (equivalently, the remainder packet is dropped from the highest)."""
    if int(virtual.sum()) <= budget:
        return virtual.copy()
    level, rem = waterfill_level_int(virtual, budget)
    out = np.minimum(virtual, level)
    if rem:
        above = np.nonzero(virtual > level)[0]
        above = above[:rem] if prefer_low_ids else above[-rem:]
        out[above] += 1
    return out


@dataclass
class FamilyRun:
    """Per-slot and per-queue records of one vectorized run."""

    per_slot_tx: np.ndarray
    first_slot: int
    accepted_at_death: dict[int, int]
    dead_transmissions: dict[int, int]
    total: int

    def tx_in(self, first: int, last: int) -> int:
        lo = max(first - self.first_slot, 0)
        hi = last - self.first_slot + 1
        return int(self.per_slot_tx[lo:hi].sum())


class _Recorder:
    def __init__(self, n_queues: int):
        self.per_slot: list[int] = []
        self.accepted: dict[int, int] = {}
        self.dead_tx = np.zeros(n_queues + 1, dtype=np.int64)
        self.dying_hwm = 0

    def note_death(self, occ: np.ndarray, q: int | None):
        if q is not None:
            self.accepted[q] = int(occ[q])
            self.dying_hwm = max(self.dying_hwm, q)

    def transmit(self, occ: np.ndarray) -> None:
        nz = np.nonzero(occ)[0]
        occ[nz] -= 1
        self.dead_tx[nz[nz <= self.dying_hwm]] += 1
        self.per_slot.append(int(nz.size))

    def finish(self, first_slot: int) -> FamilyRun:
        tx = np.array(self.per_slot, dtype=np.int64)
        dead = {int(q): int(v) for q, v in enumerate(self.dead_tx) if v > 0}
        return FamilyRun(tx, first_slot, self.accepted, dead, int(tx.sum()))


def run_staircase(params: StaircaseParams, policy: str, slots: int | None = None,
                  prefer_low_ids: bool = True) -> FamilyRun:
    """Vectorized staircase run; ``policy`` is 'lqd' or 'offline'.

    Queues are generated so the live cohort stays full through ``slots``; the
    run then drains to empty (post-``slots`` arrivals are truncated).
    """
    h, a, B, p = params.h, params.a, params.B, params.p
    if slots is None:
        slots = params.horizon
    n = slots + h + a + 1
    _check_scale(B, n)
    occ = np.zeros(n + 1, dtype=np.int64)
    rec = _Recorder(n)

    # slot 0: ramp loads j for j < h, B loads for h..h+a; queue h dies at 0
    init = np.zeros(n + 1, dtype=np.int64)
    init[1:h] = np.arange(1, h)
    init[h:h + a + 1] = B
    if policy == "lqd":
        occ[:] = waterfill_array(init, B, prefer_low_ids)
    elif policy == "offline":
        occ[:] = init
        occ[h] = min(B, p)
        occ[h + 1:h + a + 1] = 1
    else:
        raise LimitError(f"no fast staircase path for policy {policy!r}")
    rec.note_death(occ, h)
    rec.transmit(occ)

    t = 1
    while t <= slots or occ.any():
        if t <= slots:
            lo, hi, dying = t + h, t + h + a, t + h
            if policy == "lqd":
                occ[lo:hi + 1] += B
                occ[:] = waterfill_array(occ, B, prefer_low_ids)
            else:
                occ[lo:hi + 1] = 1
                occ[dying] = min(B, p)
            rec.note_death(occ, dying)
        rec.transmit(occ)
        t += 1
        if t > slots + 2 * B + 2:
            raise LimitError("fast runner failed to drain")
    return rec.finish(0)


def run_phi_k(params: PhiKParams, policy: str, prefer_low_ids: bool = True) -> FamilyRun:
    """Vectorized Phi_k run; ``policy`` is 'lqd' or 'lateqd'."""
    k, B, cycles = params.k, params.B, params.cycles
    n = k * cycles
    _check_scale(B, n)
    occ = np.zeros(n + 1, dtype=np.int64)
    rec = _Recorder(n)

    t = 1
    while t <= n or occ.any():
        if t <= n:
            cycle_end = ((t - 1) // k + 1) * k
            lo, hi, dying = t, cycle_end, t  # arriving ids; queue t dies now
            if policy == "lqd":
                occ[lo:hi + 1] += B
                occ[:] = waterfill_array(occ, B, prefer_low_ids)
            elif policy == "lateqd":
                b_t = hi - lo  # live non-dying count
                nonempty = int((occ[1:lo] > 0).sum()) + b_t + 1
                if nonempty > B:
                    mask = occ > 0
                    mask[lo:hi + 1] = True
                    keep = np.nonzero(mask)[0][:B]
                    occ[:] = 0
                    occ[keep] = 1
                else:
                    rest = occ.copy()
                    rest[lo + 1:hi + 1] = 0
                    rest[dying] = min(int(occ[dying]) + B, B)
                    occ[:] = waterfill_array(rest, B - b_t)
                    occ[lo + 1:hi + 1] = 1
            else:
                raise LimitError(f"no fast phi-k path for policy {policy!r}")
            rec.note_death(occ, dying)
        rec.transmit(occ)
        t += 1
        if t > n + 2 * B + 2:
            raise LimitError("fast runner failed to drain")
    return rec.finish(1)
