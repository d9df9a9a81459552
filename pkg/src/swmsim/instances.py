"""Hard-instance families: the staircase, the cyclic Phi_k family, and an
adaptive adversary that kills an online policy's shortest live queue."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ArrivalSchedule,
    ContractError,
    InstanceError,
    QueueSpec,
    QueueTimeline,
    SwitchConfig,
    expand,
    simulate,
)


def h_for(B: int, a: int) -> int:
    """max{w : a*w + w(w+1)/2 <= B}."""
    w = int((-(2 * a + 1) + math.isqrt((2 * a + 1) ** 2 + 8 * B)) // 2)
    while a * (w + 1) + (w + 1) * (w + 2) // 2 <= B:
        w += 1
    while w > 0 and a * w + w * (w + 1) // 2 > B:
        w -= 1
    return w


def p_for(B: int, a: int) -> int:
    """max{w : w(w+1)/2 <= B - a}."""
    m = B - a
    if m < 0:
        raise InstanceError(f"B={B} smaller than a={a}")
    w = (math.isqrt(8 * m + 1) - 1) // 2
    while (w + 1) * (w + 2) // 2 <= m:
        w += 1
    while w > 0 and w * (w + 1) // 2 > m:
        w -= 1
    return w


@dataclass(frozen=True)
class StaircaseParams:
    """Parameters of the staircase family.

    ``exact`` asserts B = a*h + h(h+1)/2 with no rounding, the regime where
    integral and fractional LQD coincide on this instance.
    """

    B: int
    a: int
    horizon: int
    C: float | None = None

    def __post_init__(self):
        if self.a < 1:
            raise InstanceError("staircase needs a >= 1")
        if self.B < self.a + 1:
            raise InstanceError("staircase needs B >= a + 1")
        if self.horizon < 1:
            raise InstanceError("staircase horizon must be >= 1")

    @property
    def h(self) -> int:
        return h_for(self.B, self.a)

    @property
    def p(self) -> int:
        return p_for(self.B, self.a)

    @property
    def is_exact(self) -> bool:
        h = self.h
        return self.B == self.a * h + h * (h + 1) // 2

    def require_exact(self) -> "StaircaseParams":
        if not self.is_exact:
            h = self.h
            raise InstanceError(
                f"B={self.B} is not exact for a={self.a}: nearest is {self.a * h + h * (h + 1) // 2}"
            )
        return self

    @classmethod
    def exact_near(cls, B_target: int, a: int | None = None, C: float = math.sqrt(2),
                   horizon: int | None = None) -> "StaircaseParams":
        """Largest exact-mode B at or below B_target for a = round(C*sqrt(B_target))."""
        if a is None:
            a = max(1, round(C * math.sqrt(B_target)))
        h = h_for(B_target, a)
        if h < 1:
            raise InstanceError(f"no valid h for B={B_target}, a={a}")
        B = a * h + h * (h + 1) // 2
        if horizon is None:
            horizon = 4 * (a + h)
        return cls(B=B, a=a, horizon=horizon, C=C)


def staircase_instance(params: StaircaseParams) -> QueueTimeline:
    """The staircase timeline, truncated at the horizon.

    Slot-0 loads: queue j gets j packets for j < h and B packets for
    h <= j <= h+a.  Queue j > h+a is live on [j-h-a, j-h]; the live cohort
    stays full through the horizon, where arrival intervals are clipped so the
    schedule ends at the horizon.
    """
    h, a, B = params.h, params.a, params.B
    H = params.horizon
    specs = []
    for j in range(1, H + h + a + 1):
        if j < h:
            specs.append(QueueSpec(j, None, initial_load=j))
        elif j <= h + a:
            live = (1, min(j - h, H)) if j > h else None
            specs.append(QueueSpec(j, live, initial_load=B))
        else:
            specs.append(QueueSpec(j, (max(1, j - h - a), min(j - h, H))))
    return QueueTimeline(specs)


@dataclass(frozen=True)
class PhiKParams:
    """Cyclic family: queue j is live on [k*floor((j-1)/k)+1, j]."""

    k: int
    B: int
    cycles: int

    def __post_init__(self):
        if self.k < 2:
            raise InstanceError("phi-k needs k >= 2")
        if self.cycles < 1:
            raise InstanceError("phi-k needs cycles >= 1")
        if self.B < 1:
            raise InstanceError("phi-k needs B >= 1")

    def live_interval(self, j: int) -> tuple[int, int]:
        return (self.k * ((j - 1) // self.k) + 1, j)


def phi_k_instance(params: PhiKParams) -> QueueTimeline:
    return QueueTimeline(
        QueueSpec(j, params.live_interval(j)) for j in range(1, params.k * params.cycles + 1)
    )


def live_nondying_count(params: PhiKParams, t: int) -> int:
    """b_t on Phi_k: k minus the within-cycle slot index."""
    if not (1 <= t <= params.k * params.cycles):
        return 0
    return params.k - ((t - 1) % params.k + 1)


# ---------------------------------------------------------------------------
# Adaptive adversary
# ---------------------------------------------------------------------------

def adaptive_adversary_run(policy, B: int, a: int, horizon: int, *,
                           warm_start: bool = True):
    """Co-simulate an online policy against the adversary that keeps exactly
    a+1 queues live and, each slot, ends the live queue where the policy holds
    the fewest packets (ties: lowest id).

    With ``warm_start`` the run opens from the staircase initial condition
    (dead ramp plus a+1 loaded queues), so against LQD the realized timeline is
    exactly the staircase instance.  Returns (result, realized_timeline) where
    the result is a replay of the policy over the realized instance.
    """
    if getattr(policy, "clairvoyant", False):
        raise ContractError("the adaptive adversary only applies to online policies")
    if horizon < 1:
        raise InstanceError("adversary horizon must be >= 1")
    config = SwitchConfig(buffer_size=B)
    policy.begin_run(None, config)

    h = h_for(B, a)
    death: dict[int, int] = {}
    state: dict[int, int] = {}
    if warm_start:
        ramp = {j: j for j in range(1, h)}
        loaded = {j: B for j in range(h, h + a + 1)}
        arrivals0 = {**ramp, **loaded}
        state = policy.admit({}, arrivals0, 0)
        state = {q: v - 1 for q, v in state.items() if v > 1}
        cohort = list(range(h + 1, h + a + 2))  # queue h died at slot 0
        born = {q: (0 if q <= h + a else 1) for q in cohort}
        next_id = h + a + 2
        init_specs = [QueueSpec(j, None, initial_load=j) for j in range(1, h)]
        init_specs.append(QueueSpec(h, None, initial_load=B))
    else:
        cohort = list(range(1, a + 2))
        born = {q: 1 for q in cohort}
        next_id = a + 2
        init_specs = []

    live_specs: list[QueueSpec] = []
    for t in range(1, horizon + 1):
        arrivals = {q: B for q in cohort}
        state = policy.admit(dict(state), arrivals, t)
        victim = min(cohort, key=lambda q: (state.get(q, 0), q))
        death[victim] = t
        start = born[victim]
        if start == 0:
            live_specs.append(QueueSpec(victim, (1, t), initial_load=B))
        else:
            live_specs.append(QueueSpec(victim, (start, t)))
        cohort.remove(victim)
        cohort.append(next_id)
        born[next_id] = t + 1
        next_id += 1
        state = {q: v - 1 for q, v in state.items() if v > 1}

    for q in cohort:  # truncation: open intervals end at the horizon
        start = born[q]
        if start <= horizon:
            if start == 0:
                live_specs.append(QueueSpec(q, (1, horizon), initial_load=B))
            else:
                live_specs.append(QueueSpec(q, (start, horizon)))

    realized = QueueTimeline(init_specs + live_specs)
    schedule = expand(realized, config)
    result = simulate(schedule, policy, config)
    return result, realized
