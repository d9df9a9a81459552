"""Cyclic linear programs certifying per-cycle throughput bounds on the
cyclic instance family.

Variables: u_1..u_k, where u_t is the number of packets the queue dying at
within-cycle slot t transmits strictly after its death slot; the queue also
transmits one packet at the death slot itself, so the reported per-queue count
is a_t = u_t + 1 and the reported per-cycle objective is

    sum_t (a_t + b_t) = sum(u) + k + k(k-1)/2,      b_t = k - t.

Auxiliaries s_{j,d} stand for the window terms max(u_j - d + 1, 0): the queue
that died d slots ago still holds that many packets.  Constraint families:

  window (all variants):  b_t + sum_d s_{t (-) d, d} <= B
  online (online, lqd):   (b_t + 1) u_t + b_t + sum_d s_{t (-) d, d} <= B
                          (live queues are indistinguishable, so an adversary
                          dooms the shortest; this is the reading that
                          reproduces the reported optima)
  chain (lqd only):       u_t <= u_{t+1} + 1 cyclically, wrap included

where t (-) d is the cyclic index ((t - d - 1) mod k) + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .model import InstanceError, SwmsimError

VARIANTS = ("any", "online", "lqd")


class SolverError(SwmsimError):
    """LP solving failed (backend error, infeasible model, bad output)."""


@dataclass(frozen=True)
class LinearRow:
    name: str
    coefs: dict[str, float]
    rhs: float  # sense is always <=


@dataclass(frozen=True)
class LinearProgram:
    """A generic max-LP with <= rows and nonnegative variables."""

    name: str
    columns: tuple[str, ...]
    objective: dict[str, float]
    objective_constant: float
    rows: tuple[LinearRow, ...]


@dataclass(frozen=True)
class CyclicLpModel:
    k: int
    B: int
    variant: str
    d_cap: int
    chain_wrap: bool = True
    chain_slack: float = 1.0

    def b(self, t: int) -> int:
        return self.k - t

    def cyc(self, t: int, d: int) -> int:
        return (t - d - 1) % self.k + 1

    @property
    def objective_constant(self) -> int:
        # k death-slot transmissions plus sum of b_t
        return self.k + self.k * (self.k - 1) // 2

    def is_trivially_infeasible(self) -> bool:
        # window at t=1 needs b_1 + (u_1 + 1) <= B, so B >= k
        return self.B < self.k

    def var_a(self, t: int) -> str:
        return f"a_{t}"

    def var_s(self, j: int, d: int) -> str:
        return f"s_{j}_{d}"

    def to_linear_program(self) -> LinearProgram:
        k, d_cap = self.k, self.d_cap
        columns = [self.var_a(t) for t in range(1, k + 1)]
        for j in range(1, k + 1):
            columns.extend(self.var_s(j, d) for d in range(d_cap + 1))
        rows: list[LinearRow] = []
        for t in range(1, k + 1):
            coefs = {self.var_s(self.cyc(t, d), d): 1.0 for d in range(d_cap + 1)}
            rows.append(LinearRow(f"W_{t}", coefs, float(self.B - self.b(t))))
        if self.variant in ("online", "lqd"):
            for t in range(1, k + 1):
                coefs = {self.var_s(self.cyc(t, d), d): 1.0 for d in range(d_cap + 1)}
                coefs[self.var_a(t)] = float(self.b(t) + 1)
                rows.append(LinearRow(f"O_{t}", coefs, float(self.B - self.b(t))))
        if self.variant == "lqd":
            last = k if self.chain_wrap else k - 1
            for t in range(1, last + 1):
                nxt = t % k + 1
                rows.append(LinearRow(
                    f"C_{t}", {self.var_a(t): 1.0, self.var_a(nxt): -1.0}, self.chain_slack))
        for j in range(1, k + 1):
            for d in range(d_cap + 1):
                rows.append(LinearRow(
                    f"S_{j}_{d}", {self.var_a(j): 1.0, self.var_s(j, d): -1.0}, float(d - 1)))
        objective = {self.var_a(t): 1.0 for t in range(1, k + 1)}
        return LinearProgram(
            name=f"swmsim_k{self.k}_B{self.B}_{self.variant}",
            columns=tuple(columns),
            objective=objective,
            objective_constant=float(self.objective_constant),
            rows=tuple(rows),
        )


def default_d_cap(B: int) -> int:
    # u^2/2 <~ B forces u <~ sqrt(2B); escalation covers the rest
    return min(B, math.isqrt(2 * B) + 3)


def build_model(k: int, B: int, variant: str, d_cap: int | None = None, *,
                chain_wrap: bool = True, chain_slack: float = 1.0) -> CyclicLpModel:
    if variant not in VARIANTS:
        raise InstanceError(f"unknown LP variant {variant!r}; expected one of {VARIANTS}")
    if k < 2:
        raise InstanceError("cyclic LP needs k >= 2")
    if B < 1:
        raise InstanceError("cyclic LP needs B >= 1")
    if d_cap is None:
        d_cap = default_d_cap(B)
    if d_cap > B:
        d_cap = B  # window terms beyond B are identically zero
    if d_cap < 1:
        raise InstanceError("d_cap must be >= 1")
    return CyclicLpModel(k=k, B=B, variant=variant, d_cap=d_cap,
                         chain_wrap=chain_wrap, chain_slack=chain_slack)


@dataclass
class LpSolution:
    k: int
    B: int
    variant: str
    objective: float
    a: list[float]  # reported per-queue counts, a_t = u_t + 1
    d_cap: int
    backend: str
    max_residual: float

    @property
    def u(self) -> list[float]:
        return [v - 1.0 for v in self.a]


def evaluate_residual(model: CyclicLpModel, u: list[float]) -> float:
    """Directly evaluate every constraint with the untruncated window sum.

    Independent of any solver and of d_cap: the window runs until its terms
    vanish.  Returns the largest constraint excess (negative means slack).
    """
    k, B = model.k, model.B
    depth = min(model.B, int(max(u)) + 2)
    worst = -math.inf
    for t in range(1, k + 1):
        window = 0.0
        for d in range(depth + 1):
            window += max(u[model.cyc(t, d) - 1] - d + 1, 0.0)
        worst = max(worst, model.b(t) + window - B)
        if model.variant in ("online", "lqd"):
            worst = max(worst, (model.b(t) + 1) * u[t - 1] + model.b(t) + window - B)
    if model.variant == "lqd":
        last = k if model.chain_wrap else k - 1
        for t in range(1, last + 1):
            nxt = t % k + 1
            worst = max(worst, u[t - 1] - u[nxt - 1] - model.chain_slack)
    for v in u:
        worst = max(worst, -v)  # nonnegativity
    return worst


def _solve_linear_program(lp: LinearProgram, backend: str, command: str | None,
                          dialect: str, file_format: str):
    if backend == "internal":
        from .simplex import solve_internal
        return solve_internal(lp), "internal"
    if backend == "highs":
        from .lpio import solve_highs
        return solve_highs(lp), "highs"
    if backend == "command":
        from .lpio import ExternalSolverCommand
        adapter = ExternalSolverCommand(command, dialect=dialect, file_format=file_format)
        return adapter.solve(lp), f"command:{adapter.template}"
    raise InstanceError(f"unknown LP backend {backend!r}")


def solve(model: CyclicLpModel, backend: str = "auto", *, command: str | None = None,
          dialect: str = "plain", file_format: str = "lp") -> LpSolution:
    """Solve a cyclic model, escalating d_cap until no window term is clipped.

    A solve is accepted only when max(u) + 1 <= d_cap, i.e. the truncated
    window provably equals the full one at the optimum.
    """
    if model.is_trivially_infeasible():
        raise SolverError(
            f"model k={model.k} B={model.B} is infeasible: the slot-1 window needs B >= k"
        )
    while True:
        lp = model.to_linear_program()
        chosen = backend
        if backend == "auto":
            chosen = "internal" if len(lp.columns) <= 2500 else "highs"
        (objective_u, values), backend_id = _solve_linear_program(
            lp, chosen, command, dialect, file_format)
        u = [values.get(model.var_a(t), 0.0) for t in range(1, model.k + 1)]
        if max(u) + 1.0 <= model.d_cap + 1e-9 or model.d_cap >= model.B:
            residual = evaluate_residual(model, u)
            return LpSolution(
                k=model.k, B=model.B, variant=model.variant,
                objective=objective_u + model.objective_constant,
                a=[v + 1.0 for v in u],
                d_cap=model.d_cap,
                backend=backend_id,
                max_residual=residual,
            )
        model = replace(model, d_cap=min(2 * model.d_cap, model.B))


def ratio_report(k: int, B: int, backend: str = "auto", *, command: str | None = None,
                 d_cap: int | None = None, chain_wrap: bool = True,
                 chain_slack: float = 1.0) -> dict:
    """Solve all three variants and report certified competitive-ratio lower bounds.

    The 'any' objective is achievable by the clairvoyant optimum (it can pick
    the resulting acceptance sequence), while the online/lqd objectives are
    upper bounds, so each ratio is a valid lower bound on competitiveness.
    """
    sols = {
        variant: solve(build_model(k, B, variant, d_cap, chain_wrap=chain_wrap,
                                   chain_slack=chain_slack),
                       backend=backend, command=command)
        for variant in VARIANTS
    }
    return {
        "k": k,
        "B": B,
        "opt": sols["any"].objective,
        "online": sols["online"].objective,
        "lqd": sols["lqd"].objective,
        "ratio_lqd": sols["any"].objective / sols["lqd"].objective,
        "ratio_online": sols["any"].objective / sols["online"].objective,
        "solver": sols["any"].backend,
        "max_residual": max(s.max_residual for s in sols.values()),
    }
