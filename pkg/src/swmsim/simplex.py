"""Dense primal simplex for the package's own LP models.

Solves max c.x s.t. A x <= b, x >= 0 with a full-tableau primal simplex
(Dantzig pricing, Bland fallback on stalls).  The cyclic models are brought to
nonnegative RHS by a lower-bound presolve: a row  x - y <= rhs  with rhs < 0
pins y >= x - rhs, and when y is otherwise a pure >=-side helper (appears only
with +1 coefficients, never in the objective) it is eliminated by substituting
y = x - rhs.

Adequate for models with a few thousand columns; larger ones should use the
HiGHS backend.
"""

from __future__ import annotations

import numpy as np

from .lpbound import LinearProgram, LinearRow, SolverError


def _lower_bound_presolve(lp: LinearProgram) -> tuple[LinearProgram, list[tuple[str, str, float]]]:
    """Eliminate helper variables pinned as y >= x + const by a negative-RHS row.

    Returns the reduced program and substitutions [(y, x, const)] with
    y = x + const.
    """
    eliminated: dict[str, tuple[str, float]] = {}
    kept_rows: list[LinearRow] = []
    for row in lp.rows:
        if row.rhs < 0:
            items = sorted(row.coefs.items())
            if len(items) != 2:
                raise SolverError(f"internal solver cannot presolve row {row.name}")
            (n1, c1), (n2, c2) = items
            if c1 == 1.0 and c2 == -1.0:
                x, y = n1, n2
            elif c1 == -1.0 and c2 == 1.0:
                x, y = n2, n1
            else:
                raise SolverError(f"internal solver cannot presolve row {row.name}")
            if y in lp.objective or y in eliminated:
                raise SolverError(f"internal solver cannot presolve row {row.name}")
            eliminated[y] = (x, -row.rhs)
        else:
            kept_rows.append(row)

    if not eliminated:
        return lp, []

    new_rows = []
    for row in kept_rows:
        coefs = dict(row.coefs)
        rhs = row.rhs
        for y, (x, const) in eliminated.items():
            if y in coefs:
                c = coefs.pop(y)
                if c != 1.0:
                    raise SolverError(
                        f"helper {y} appears with coefficient {c} in {row.name}; presolve invalid")
                coefs[x] = coefs.get(x, 0.0) + c
                rhs -= c * const
        new_rows.append(LinearRow(row.name, coefs, rhs))
    columns = tuple(c for c in lp.columns if c not in eliminated)
    reduced = LinearProgram(lp.name, columns, lp.objective, lp.objective_constant,
                            tuple(new_rows))
    return reduced, [(y, x, const) for y, (x, const) in eliminated.items()]


def simplex_max(c: np.ndarray, A: np.ndarray, b: np.ndarray, *,
                tol: float = 1e-9, max_iters: int | None = None) -> tuple[float, np.ndarray]:
    """Full-tableau primal simplex for max c.x, A x <= b, x >= 0, b >= 0."""
    m, n = A.shape
    if (b < 0).any():
        raise SolverError("simplex_max needs nonnegative RHS (run the presolve first)")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m)
    if max_iters is None:
        max_iters = 50 * (m + n) + 10_000

    stalled = 0
    bland = False
    last_obj = -np.inf
    for _ in range(max_iters):
        costs = T[m, :n + m]
        if bland:
            negs = np.nonzero(costs < -tol)[0]
            if negs.size == 0:
                break
            col = int(negs[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -tol:
                break
        ratios = np.full(m, np.inf)
        pos = T[:m, col] > tol
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            raise SolverError("LP is unbounded")
        if bland:
            best = ratios[row]
            candidates = np.nonzero(np.isclose(ratios, best, rtol=0, atol=tol))[0]
            row = int(min(candidates, key=lambda r: basis[r]))
        piv = T[row, col]
        T[row] /= piv
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        basis[row] = col

        obj = T[m, -1]
        if obj <= last_obj + tol:
            stalled += 1
            if stalled > 2 * m + 50:
                bland = True
        else:
            stalled = 0
        last_obj = obj
    else:
        raise SolverError("simplex iteration limit reached")

    x = np.zeros(n + m)
    x[basis] = T[:m, -1]
    return float(T[m, -1]), x[:n]


def solve_internal(lp: LinearProgram) -> tuple[float, dict[str, float]]:
    """Solve a LinearProgram with the built-in simplex; returns (objective, values)."""
    reduced, subs = _lower_bound_presolve(lp)
    cols = {name: i for i, name in enumerate(reduced.columns)}
    m, n = len(reduced.rows), len(reduced.columns)
    A = np.zeros((m, n))
    b = np.zeros(m)
    for i, row in enumerate(reduced.rows):
        for name, coef in row.coefs.items():
            A[i, cols[name]] = coef
        b[i] = row.rhs
    c = np.zeros(n)
    for name, coef in reduced.objective.items():
        c[cols[name]] = coef
    obj, x = simplex_max(c, A, b)
    values = {name: float(x[i]) for name, i in cols.items()}
    for y, xname, const in subs:
        values[y] = values.get(xname, 0.0) + const
    return obj, values
