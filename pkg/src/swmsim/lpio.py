"""LP file emission and parsing, the HiGHS backend, and the external-solver
subprocess adapter.

Emitted files are deterministic (fixed row/column order, no timestamps) so
reruns are byte-identical.  The objective constant cannot be expressed portably
inside MPS/LP files; it is carried as a leading comment and re-applied by the
adapter, so solver outputs always report the plain LP objective.

``swmsim-lp-solve`` (see :func:`solver_main`) is a self-contained file solver
conforming to the adapter contract: it reads one of the emitted formats and
writes the 'plain' solution dialect.  It runs on scipy's HiGHS and therefore
provides an implementation independent of the built-in simplex.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .lpbound import LinearProgram, LinearRow, SolverError

CONSTANT_COMMENT = "objective-constant"


# ---------------------------------------------------------------------------
# scipy/HiGHS backend
# ---------------------------------------------------------------------------

def solve_highs(lp: LinearProgram) -> tuple[float, dict[str, float]]:
    cols = {name: i for i, name in enumerate(lp.columns)}
    rows, colidx, vals, rhs = [], [], [], []
    for i, row in enumerate(lp.rows):
        for name, coef in row.coefs.items():
            rows.append(i)
            colidx.append(cols[name])
            vals.append(coef)
        rhs.append(row.rhs)
    A = coo_matrix((vals, (rows, colidx)), shape=(len(lp.rows), len(lp.columns))).tocsr()
    c = np.zeros(len(lp.columns))
    for name, coef in lp.objective.items():
        c[cols[name]] = -coef  # linprog minimizes
    res = linprog(c, A_ub=A, b_ub=np.array(rhs), bounds=(0, None), method="highs")
    if res.status == 2:
        raise SolverError(f"model {lp.name} is infeasible")
    if res.status != 0:
        raise SolverError(f"HiGHS failed on {lp.name}: {res.message}")
    values = {name: float(res.x[i]) for name, i in cols.items()}
    return float(-res.fun), values


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def emit_lp_text(lp: LinearProgram) -> str:
    """CPLEX-style LP text; all variables keep the default bounds 0 <= x."""
    out = [f"\\ {lp.name}", f"\\ {CONSTANT_COMMENT}: {_num(lp.objective_constant)}", "Maximize"]
    terms = [f"+ {_num(coef)} {name}" for name, coef in sorted(lp.objective.items())]
    out.append(" obj: " + _wrap(terms))
    out.append("Subject To")
    for row in lp.rows:
        terms = []
        for name in sorted(row.coefs):
            coef = row.coefs[name]
            sign = "+" if coef >= 0 else "-"
            terms.append(f"{sign} {_num(abs(coef))} {name}")
        out.append(f" {row.name}: " + _wrap(terms) + f" <= {_num(row.rhs)}")
    out.append("End")
    return "\n".join(out) + "\n"


def _wrap(terms: list[str], per_line: int = 8) -> str:
    lines = []
    for i in range(0, len(terms), per_line):
        lines.append(" ".join(terms[i:i + per_line]))
    return "\n   ".join(lines)


def emit_mps(lp: LinearProgram) -> str:
    """Free-format MPS with an OBJSENSE MAX section; entries one per line."""
    out = [f"* {CONSTANT_COMMENT}: {_num(lp.objective_constant)}",
           f"NAME {lp.name}", "OBJSENSE", "    MAX", "ROWS", " N obj"]
    for row in lp.rows:
        out.append(f" L {row.name}")
    out.append("COLUMNS")
    by_col: dict[str, list[tuple[str, float]]] = {name: [] for name in lp.columns}
    for name, coef in lp.objective.items():
        by_col[name].append(("obj", coef))
    for row in lp.rows:
        for name, coef in row.coefs.items():
            by_col[name].append((row.name, coef))
    for name in lp.columns:
        for row_name, coef in by_col[name]:
            out.append(f"    {name} {row_name} {_num(coef)}")
    out.append("RHS")
    for row in lp.rows:
        if row.rhs != 0:
            out.append(f"    rhs {row.name} {_num(row.rhs)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Parsing (round-trip for the emitted dialects)
# ---------------------------------------------------------------------------

def parse_lp_text(text: str) -> LinearProgram:
    name = "parsed"
    constant = 0.0
    objective: dict[str, float] = {}
    rows: list[LinearRow] = []
    section = None
    current: list[str] = []

    def flush():
        nonlocal current
        if not current:
            return
        joined = " ".join(current)
        current = []
        label, _, body = joined.partition(":")
        label = label.strip()
        if section == "objective":
            objective.update(_parse_terms(body))
        else:
            if "<=" not in body:
                raise SolverError(f"row {label!r} is not a <= constraint")
            expr, _, rhs = body.rpartition("<=")
            coefs = _parse_terms(expr)
            rows.append(LinearRow(label, coefs, float(rhs)))

    for raw in text.splitlines():
        line = raw.rstrip()
        if line.startswith("\\"):
            comment = line[1:].strip()
            if comment.startswith(CONSTANT_COMMENT):
                constant = float(comment.split(":", 1)[1])
            elif comment:
                name = comment
            continue
        stripped = line.strip()
        if not stripped:
            continue
        lowered = stripped.lower()
        if lowered in ("maximize", "maximise", "max"):
            flush(); section = "objective"; continue
        if lowered in ("subject to", "st", "s.t."):
            flush(); section = "rows"; continue
        if lowered in ("bounds", "end"):
            flush(); section = lowered; continue
        if section in ("objective", "rows"):
            if ":" in stripped and current:
                flush()
            current.append(stripped)
    flush()
    columns = sorted({n for r in rows for n in r.coefs} | set(objective))
    return LinearProgram(name, tuple(columns), objective, constant, tuple(rows))


def _parse_terms(expr: str) -> dict[str, float]:
    # operators and coefficients are space-separated in the emitted dialect
    coefs: dict[str, float] = {}
    sign = 1.0
    pending: float | None = None
    for tok in expr.split():
        if tok == "+":
            sign, pending = 1.0, None
        elif tok == "-":
            sign, pending = -1.0, None
        else:
            try:
                value = float(tok)
            except ValueError:
                coefs[tok] = coefs.get(tok, 0.0) + sign * (1.0 if pending is None else pending)
                sign, pending = 1.0, None
            else:
                pending = value if pending is None else pending * value
    return coefs


def parse_mps(text: str) -> LinearProgram:
    name = "parsed"
    constant = 0.0
    section = None
    row_order: list[str] = []
    row_coefs: dict[str, dict[str, float]] = {}
    rhs: dict[str, float] = {}
    objective: dict[str, float] = {}
    col_order: list[str] = []
    seen_cols: set[str] = set()
    obj_row = None

    for raw in text.splitlines():
        if raw.startswith("*"):
            comment = raw[1:].strip()
            if comment.startswith(CONSTANT_COMMENT):
                constant = float(comment.split(":", 1)[1])
            continue
        if not raw.strip():
            continue
        head = raw.split()
        if raw[0] not in " \t":
            key = head[0].upper()
            if key == "NAME":
                name = head[1] if len(head) > 1 else name
                section = None
            elif key in ("OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "ENDATA"):
                section = key
            else:
                raise SolverError(f"unknown MPS section {key!r}")
            continue
        if section == "OBJSENSE":
            if head[0].upper() not in ("MAX", "MAXIMIZE"):
                raise SolverError("only maximization MPS files are supported")
        elif section == "ROWS":
            sense, row_name = head[0].upper(), head[1]
            if sense == "N":
                obj_row = row_name
            elif sense == "L":
                row_order.append(row_name)
                row_coefs[row_name] = {}
            else:
                raise SolverError(f"unsupported row sense {sense!r}")
        elif section == "COLUMNS":
            col = head[0]
            if col not in seen_cols:
                seen_cols.add(col)
                col_order.append(col)
            for i in range(1, len(head) - 1, 2):
                row_name, coef = head[i], float(head[i + 1])
                if row_name == obj_row:
                    objective[col] = objective.get(col, 0.0) + coef
                else:
                    row_coefs[row_name][col] = row_coefs[row_name].get(col, 0.0) + coef
        elif section == "RHS":
            for i in range(1, len(head) - 1, 2):
                rhs[head[i]] = float(head[i + 1])
        elif section in ("BOUNDS", "RANGES"):
            raise SolverError(f"{section} entries are not supported")
    rows = tuple(LinearRow(rn, row_coefs[rn], rhs.get(rn, 0.0)) for rn in row_order)
    return LinearProgram(name, tuple(col_order), objective, constant, rows)


# ---------------------------------------------------------------------------
# Solution files ('plain' dialect) and the external adapter
# ---------------------------------------------------------------------------

def write_solution_plain(objective: float, values: dict[str, float]) -> str:
    lines = [f"objective {objective!r}"]
    for name in sorted(values):
        lines.append(f"{name} {values[name]!r}")
    return "\n".join(lines) + "\n"


def parse_solution_plain(text: str) -> tuple[float, dict[str, float]]:
    objective = None
    values: dict[str, float] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolverError(f"solution line {line_no}: expected 'name value', got {line!r}")
        if parts[0] == "objective":
            objective = float(parts[1])
        else:
            values[parts[0]] = float(parts[1])
    if objective is None:
        raise SolverError("solution file has no objective line")
    return objective, values


SOLUTION_DIALECTS = {"plain": parse_solution_plain}
DEFAULT_COMMAND = "swmsim-lp-solve {input} {output}"
COMMAND_ENV_VAR = "SWMSIM_LP_COMMAND"


class ExternalSolverCommand:
    """Run an external LP solver via a command template with {input}/{output}."""

    def __init__(self, template: str | None = None, dialect: str = "plain",
                 file_format: str = "lp"):
        self.template = template or os.environ.get(COMMAND_ENV_VAR) or DEFAULT_COMMAND
        if dialect not in SOLUTION_DIALECTS:
            raise SolverError(f"unknown solution dialect {dialect!r}")
        self.parse_solution = SOLUTION_DIALECTS[dialect]
        if file_format not in ("lp", "mps"):
            raise SolverError(f"unknown LP file format {file_format!r}")
        self.file_format = file_format

    def solve(self, lp: LinearProgram) -> tuple[float, dict[str, float]]:
        emit = emit_lp_text if self.file_format == "lp" else emit_mps
        with tempfile.TemporaryDirectory(prefix="swmsim-lp-") as tmp:
            input_path = os.path.join(tmp, f"model.{self.file_format}")
            output_path = os.path.join(tmp, "solution.txt")
            with open(input_path, "w") as f:
                f.write(emit(lp))
            argv = [arg.format(input=input_path, output=output_path)
                    for arg in shlex.split(self.template)]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0:
                raise SolverError(
                    f"external solver {argv[0]!r} exited {proc.returncode}\n"
                    f"stdout: {proc.stdout[-2000:]}\nstderr: {proc.stderr[-2000:]}"
                )
            if not os.path.exists(output_path):
                raise SolverError(f"external solver wrote no solution file\nstdout: {proc.stdout[-2000:]}")
            with open(output_path) as f:
                return self.parse_solution(f.read())


def solver_main(argv: list[str] | None = None) -> int:
    """Entry point of ``swmsim-lp-solve``: read an emitted LP/MPS file, solve
    it with HiGHS, write the plain solution dialect."""
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: swmsim-lp-solve <model.lp|model.mps> <solution.txt>", file=sys.stderr)
        return 1
    input_path, output_path = args
    try:
        with open(input_path) as f:
            text = f.read()
        if input_path.endswith(".mps") or text.lstrip("*# \n").startswith("NAME"):
            lp = parse_mps(text)
        else:
            lp = parse_lp_text(text)
        objective, values = solve_highs(lp)
    except (OSError, SolverError, ValueError) as exc:
        print(f"swmsim-lp-solve: {exc}", file=sys.stderr)
        return 3
    with open(output_path, "w") as f:
        f.write(write_solution_plain(objective, values))
    return 0
