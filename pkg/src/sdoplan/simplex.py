"""Bounded-variable primal simplex with a dense revised basis inverse.

Rows are brought to equality form with one slack per row; infeasible rows
get a phase-1 artificial.  The basis inverse is kept explicitly and
rebuilt from scratch every ``refactor_every`` pivots (and before any
status is certified).  Pricing uses static column norms ("steepest-edge
lite"); entering ties break to the lowest index, and a long degenerate
streak switches to Bland's rule until progress resumes.  The whole path
is deterministic: identical input yields identical output bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _blas
from . import kernels as _kernels
from ._kernels_py import AT_LOWER, AT_UPPER, BASIC, FIXED, FREE
from .errors import NumericalBreakdown
from .lp import REL_EQ, REL_GE, REL_LE, LpOutcome, LpProblem, LpStatus


@dataclass(frozen=True)
class SolverTolerances:
    feas: float = 1e-7          # max primal violation of an Optimal outcome
    opt: float = 1e-7           # reduced-cost threshold
    pivot: float = 1e-9         # smallest usable pivot magnitude
    bind: float = 1e-6          # slack above this counts as nonbinding
    refactor_every: int = 64
    refactor_retries: int = 3
    degenerate_switch: int = 512
    max_iterations: int | None = None


DEFAULT_TOLERANCES = SolverTolerances()


def solve(problem: LpProblem, tol: SolverTolerances | None = None,
          kernels_module=None) -> LpOutcome:
    """Solve a problem; see `SolverTolerances` for the numeric contract."""
    _blas.pin_blas_threads()
    tol = tol or DEFAULT_TOLERANCES
    kern = kernels_module or _kernels.active()
    return _Simplex(problem, tol, kern).run()


class _Simplex:
    def __init__(self, problem: LpProblem, tol: SolverTolerances, kern):
        self.prob = problem
        self.tol = tol
        self.kern = kern
        A = problem.A
        m, n = A.shape
        self.m, self.n = m, n
        self.total = n + 2 * m
        rel = problem.relations

        lo = np.empty(self.total)
        up = np.empty(self.total)
        lo[:n] = problem.lower
        up[:n] = problem.upper
        # slack bounds encode the row relation
        lo[n:n + m] = np.where(rel == REL_GE, -np.inf, 0.0)
        up[n:n + m] = np.where(rel == REL_LE, np.inf, 0.0)
        lo[n + m:] = 0.0
        up[n + m:] = np.inf
        self.lo, self.up = lo, up

        val = np.zeros(self.total)
        status = np.empty(self.total, dtype=np.int8)
        fin_lo = np.isfinite(lo)
        fin_up = np.isfinite(up)
        fixed = fin_lo & fin_up & (lo == up)
        at_lo = fin_lo & ~fixed
        at_up = ~fin_lo & fin_up
        free = ~fin_lo & ~fin_up
        val[at_lo] = lo[at_lo]
        val[at_up] = up[at_up]
        val[fixed] = lo[fixed]
        status[at_lo] = AT_LOWER
        status[at_up] = AT_UPPER
        status[free] = FREE
        status[fixed] = FIXED
        self.val, self.status = val, status

        # rows whose slack can absorb the initial residual start slack-basic;
        # the rest start on a signed artificial
        resid = problem.rhs - A @ val[:n]
        slack_ok = (resid >= lo[n:n + m]) & (resid <= up[n:n + m])
        art_sign = np.where(resid >= 0.0, 1.0, -1.0)
        self.art_used = ~slack_ok
        rows = np.arange(m)
        self.basis = np.where(slack_ok, n + rows, n + m + rows)
        val[n + rows[slack_ok]] = resid[slack_ok]
        val[n + m + rows[~slack_ok]] = np.abs(resid[~slack_ok])
        status[self.basis] = BASIC
        idle_art = n + m + rows[slack_ok]
        self.lo[idle_art] = self.up[idle_art] = 0.0
        status[idle_art] = FIXED

        self.Aext = sp.hstack(
            [A.tocsc(), sp.identity(m, format="csc"),
             sp.diags(art_sign, format="csc")], format="csc")
        self.AT = self.Aext.T.tocsr()
        self._indptr = self.Aext.indptr
        self._indices = self.Aext.indices
        self._data = self.Aext.data

        gamma = 1.0 + np.asarray(
            self.Aext.multiply(self.Aext).sum(axis=0)).ravel()
        self.inv_scale = 1.0 / np.sqrt(gamma)

        diag = np.where(slack_ok, 1.0, art_sign)
        self.binv = np.asfortranarray(np.diag(diag))

        self.iter_total = 0
        self.phase1_iters = 0
        self.max_iter = tol.max_iterations or (10_000 + 20 * (m + n))

    # --- driver -------------------------------------------------------

    def run(self) -> LpOutcome:
        infeasible = self._phase1()
        if infeasible:
            return self._outcome(LpStatus.INFEASIBLE)
        c2 = np.zeros(self.total)
        c2[:self.n] = self.prob.c
        self.cost = c2
        if self._iterate(c2, phase=2) == "unbounded":
            return self._outcome(LpStatus.UNBOUNDED)
        for _ in range(self.tol.refactor_retries):
            self._refactor()
            before = self.iter_total
            if self._iterate(c2, phase=2) == "unbounded":
                return self._outcome(LpStatus.UNBOUNDED)
            if self.iter_total == before and \
                    self._primal_infeasibility() <= self.tol.feas:
                return self._outcome(LpStatus.OPTIMAL)
        raise NumericalBreakdown(
            "could not certify an optimal basis after refactorization retries")

    def _phase1(self) -> bool:
        n, m = self.n, self.m
        if self.art_used.any():
            c1 = np.zeros(self.total)
            c1[n + m + np.flatnonzero(self.art_used)] = 1.0
            self._iterate(c1, phase=1)
            for _ in range(self.tol.refactor_retries):
                self._refactor()
                before = self.iter_total
                self._iterate(c1, phase=1)
                if self.iter_total == before:
                    break
            else:
                raise NumericalBreakdown("phase 1 failed to settle")
            self.phase1_iters = self.iter_total
            if self.val[n + m:].sum() > self.tol.feas:
                return True
        # artificials are spent: pin them so they can never re-enter
        art = slice(n + m, self.total)
        self.lo[art] = 0.0
        self.up[art] = 0.0
        nonbasic_art = np.flatnonzero(self.status[art] != BASIC) + n + m
        self.status[nonbasic_art] = FIXED
        self.val[nonbasic_art] = 0.0
        return False

    # --- main loop ----------------------------------------------------

    def _iterate(self, c, phase):
        tol = self.tol
        kern = self.kern
        bland = False
        degen_streak = 0
        since_refactor = 0
        while True:
            if self.iter_total >= self.max_iter:
                raise NumericalBreakdown("iteration limit exceeded")
            y = self.binv.T @ c[self.basis]
            d = c - self.AT @ y
            j = kern.choose_entering(d, self.status, self.inv_scale,
                                     tol.opt, bland)
            if j < 0:
                return "optimal"
            st = self.status[j]
            if st == AT_UPPER:
                sigma = -1.0
            elif st == AT_LOWER:
                sigma = 1.0
            else:
                sigma = 1.0 if d[j] < 0.0 else -1.0
            w = self.binv @ self._column(j)
            gap = self.up[j] - self.lo[j]
            step, pos, at_up = kern.ratio_test(
                self.val[self.basis], self.lo[self.basis],
                self.up[self.basis], w, sigma, gap, tol.pivot)
            if pos == -2:
                if phase == 1:
                    # phase-1 objective is bounded below; a ray is numerics
                    raise NumericalBreakdown("phase-1 ray detected")
                return "unbounded"
            self.iter_total += 1
            self.val[self.basis] -= sigma * step * w
            if pos == -1:
                # bound flip: entering variable crosses to its other bound
                self.val[j] = self.up[j] if sigma > 0 else self.lo[j]
                self.status[j] = AT_UPPER if sigma > 0 else AT_LOWER
            else:
                leave = self.basis[pos]
                self.val[j] = self.val[j] + sigma * step
                if phase == 1 and leave >= self.n + self.m:
                    self.lo[leave] = self.up[leave] = 0.0
                self.val[leave] = self.up[leave] if at_up else self.lo[leave]
                if self.lo[leave] == self.up[leave]:
                    self.status[leave] = FIXED
                else:
                    self.status[leave] = AT_UPPER if at_up else AT_LOWER
                self.basis[pos] = j
                self.status[j] = BASIC
                kern.update_inverse(self.binv, w, pos)
                since_refactor += 1
                if since_refactor >= tol.refactor_every:
                    self._refactor()
                    since_refactor = 0
            if step <= 1e-11:
                degen_streak += 1
                if degen_streak >= tol.degenerate_switch:
                    bland = True
            else:
                degen_streak = 0
                bland = False

    # --- support ------------------------------------------------------

    def _column(self, j):
        col = np.zeros(self.m)
        sl = slice(self._indptr[j], self._indptr[j + 1])
        col[self._indices[sl]] = self._data[sl]
        return col

    def _refactor(self):
        base = self.Aext[:, self.basis].toarray()
        try:
            self.binv = np.asfortranarray(np.linalg.inv(base))
        except np.linalg.LinAlgError:
            raise NumericalBreakdown("singular basis matrix") from None
        off = self.val.copy()
        off[self.basis] = 0.0
        resid = self.prob.rhs - self.Aext @ off
        self.val[self.basis] = self.binv @ resid

    def _primal_infeasibility(self):
        resid = self.prob.rhs - self.Aext @ self.val
        viol = np.maximum(self.lo - self.val, 0.0)
        viol = np.maximum(viol, self.val - self.up)
        worst = float(viol.max()) if viol.size else 0.0
        if resid.size:
            worst = max(worst, float(np.abs(resid).max()))
        return worst

    def _outcome(self, status) -> LpOutcome:
        if status is not LpStatus.OPTIMAL:
            return LpOutcome(status=status, iterations=self.iter_total,
                             phase1_iterations=self.phase1_iters)
        x = self.val[:self.n].copy()
        act = self.prob.A @ x
        rel = self.prob.relations
        slacks = np.where(rel == REL_LE, self.prob.rhs - act,
                          np.where(rel == REL_GE, act - self.prob.rhs, 0.0))
        duals = self.binv.T @ self.cost[self.basis]
        return LpOutcome(status=LpStatus.OPTIMAL, x=x,
                         value=float(self.prob.c @ x), activities=act,
                         slacks=slacks, duals=duals,
                         iterations=self.iter_total,
                         phase1_iterations=self.phase1_iters,
                         relations=rel.copy())
