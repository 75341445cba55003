"""Linear-program container, solve outcome, dualization and slack reporting.

Problems are minimization problems over sparse rows with per-row relations
and per-variable bounds (default ``[0, +inf)``).  The solver lives in
`sdoplan.simplex`; this module owns the data contracts around it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NotOptimal

REL_LE = -1
REL_EQ = 0
REL_GE = 1

_REL_ALIASES = {
    "<": REL_LE, "<=": REL_LE, REL_LE: REL_LE,
    "=": REL_EQ, "==": REL_EQ, REL_EQ: REL_EQ,
    ">": REL_GE, ">=": REL_GE, REL_GE: REL_GE,
}


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _as_relations(relations, m):
    try:
        rel = np.array([_REL_ALIASES[r] for r in relations], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"unknown row relation {exc.args[0]!r}") from None
    if rel.shape[0] != m:
        raise ValueError("relation count does not match row count")
    return rel


class LpProblem:
    """min c.x  s.t.  A x (<=|=|>=) rhs,  lower <= x <= upper."""

    def __init__(self, c, A, relations, rhs, lower=None, upper=None):
        self.c = np.ascontiguousarray(c, dtype=np.float64)
        self.A = sp.csr_matrix(A, dtype=np.float64)
        m, n = self.A.shape
        if self.c.shape != (n,):
            raise ValueError("objective length does not match column count")
        self.relations = _as_relations(relations, m)
        self.rhs = np.ascontiguousarray(rhs, dtype=np.float64)
        if self.rhs.shape != (m,):
            raise ValueError("rhs length does not match row count")
        self.lower = (np.zeros(n) if lower is None
                      else np.ascontiguousarray(lower, dtype=np.float64))
        self.upper = (np.full(n, np.inf) if upper is None
                      else np.ascontiguousarray(upper, dtype=np.float64))
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound length does not match column count")
        for name, arr in (("c", self.c), ("A", self.A.data), ("rhs", self.rhs)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coefficient in {name}")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound above upper bound")

    @property
    def n_rows(self):
        return self.A.shape[0]

    @property
    def n_cols(self):
        return self.A.shape[1]

    def copy(self):
        return LpProblem(self.c.copy(), self.A.copy(), self.relations.copy(),
                         self.rhs.copy(), self.lower.copy(), self.upper.copy())

    def with_objective(self, c):
        out = self.copy()
        out.c = np.ascontiguousarray(c, dtype=np.float64)
        if out.c.shape != (out.n_cols,):
            raise ValueError("objective length does not match column count")
        return out

    def add_rows(self, rows, relations, rhs):
        """Return a new problem with extra rows appended."""
        rows = sp.csr_matrix(rows, dtype=np.float64)
        if rows.shape[1] != self.n_cols:
            raise ValueError("new rows have wrong column count")
        A = sp.vstack([self.A, rows], format="csr")
        rel = np.concatenate([self.relations,
                              _as_relations(relations, rows.shape[0])])
        rhs = np.concatenate([self.rhs, np.atleast_1d(np.asarray(rhs, float))])
        return LpProblem(self.c.copy(), A, rel, rhs,
                         self.lower.copy(), self.upper.copy())


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    x: np.ndarray | None = None
    value: float | None = None
    activities: np.ndarray | None = None
    slacks: np.ndarray | None = None
    duals: np.ndarray | None = None
    iterations: int = 0
    phase1_iterations: int = 0
    relations: np.ndarray | None = field(default=None, repr=False)

    def canonical_bytes(self):
        """Stable byte serialization, used by determinism checks."""
        parts = [self.status.value.encode()]
        for arr in (self.x, self.activities, self.slacks, self.duals):
            parts.append(b"|" + (b"" if arr is None else arr.tobytes()))
        parts.append(repr(self.value).encode())
        return b"".join(parts)


@dataclass(frozen=True)
class SlackReport:
    rows: np.ndarray
    slacks: np.ndarray
    nonbinding: np.ndarray  # bool, aligned with `rows`

    def nonbinding_rows(self):
        return self.rows[self.nonbinding]


def slack_report(outcome: LpOutcome, rows=None, tol_bind: float = 1e-6):
    """Per-row slacks of an optimal outcome; slack > tol_bind = nonbinding.

    Slack is rhs - activity for <= rows and activity - rhs for >= rows;
    equality rows are always binding and report zero.
    """
    if outcome.status is not LpStatus.OPTIMAL:
        raise NotOptimal(f"slack_report requires an Optimal outcome, "
                         f"got {outcome.status.value}")
    if rows is None:
        rows = np.arange(outcome.slacks.shape[0])
    rows = np.asarray(rows, dtype=int)
    slacks = outcome.slacks[rows]
    return SlackReport(rows=rows, slacks=slacks,
                       nonbinding=slacks > tol_bind)


def dualize(problem: LpProblem) -> LpProblem:
    """Standard LP dual, returned as a minimization problem.

    Accepts nonnegative, free, or upper-bounded (``0 <= x <= u``) variables;
    finite upper bounds are folded in as explicit rows first.  With the
    returned sign convention, ``solve(dual).value == -solve(primal).value``.
    """
    prob = problem
    fold = np.flatnonzero(np.isfinite(prob.upper))
    if fold.size:
        extra = sp.csr_matrix(
            (np.ones(fold.size), (np.arange(fold.size), fold)),
            shape=(fold.size, prob.n_cols))
        prob = prob.add_rows(extra, [REL_LE] * fold.size, prob.upper[fold])
        prob.upper[:] = np.inf
    free = np.isinf(prob.lower) & (prob.lower < 0)
    nonneg = prob.lower == 0.0
    if not np.all(free | nonneg):
        raise ValueError("dualize supports x >= 0 or free variables only")

    # one dual variable per row, sign per relation; one dual row per column
    m, n = prob.n_rows, prob.n_cols
    dual_lower = np.where(prob.relations == REL_GE, 0.0, -np.inf)
    dual_upper = np.where(prob.relations == REL_LE, 0.0, np.inf)
    dual_rel = np.where(free, REL_EQ, REL_LE).astype(np.int8)
    return LpProblem(c=-prob.rhs, A=prob.A.T.tocsr(), relations=dual_rel,
                     rhs=prob.c, lower=dual_lower, upper=dual_upper)


def to_mps(problem: LpProblem, name: str = "SDOPLAN") -> str:
    """Fixed-column MPS rendering of a problem, for external cross-checks."""
    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    tag = {REL_LE: "L", REL_EQ: "E", REL_GE: "G"}
    for i, rel in enumerate(problem.relations):
        lines.append(f" {tag[int(rel)]}  R{i:07d}")
    lines.append("COLUMNS")
    csc = problem.A.tocsc()
    for j in range(problem.n_cols):
        entries = [("COST", problem.c[j])] if problem.c[j] != 0.0 else []
        sl = slice(csc.indptr[j], csc.indptr[j + 1])
        entries += [(f"R{i:07d}", v)
                    for i, v in zip(csc.indices[sl], csc.data[sl])]
        for row, val in entries:
            lines.append(f"    X{j:07d}  {row:<10}{val: .12E}")
    lines.append("RHS")
    for i, b in enumerate(problem.rhs):
        if b != 0.0:
            lines.append(f"    RHS       R{i:07d}  {b: .12E}")
    lines.append("BOUNDS")
    for j, (lo, up) in enumerate(zip(problem.lower, problem.upper)):
        if np.isinf(lo) and np.isinf(up):
            lines.append(f" FR BND       X{j:07d}")
            continue
        if lo != 0.0:
            if np.isinf(lo):
                lines.append(f" MI BND       X{j:07d}")
            else:
                lines.append(f" LO BND       X{j:07d}  {lo: .12E}")
        if np.isfinite(up):
            lines.append(f" UP BND       X{j:07d}  {up: .12E}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
