"""Bound-and-scan machinery over the multiobjective LP.

Pipeline: a payoff table from cyclic lexicographic passes sets per-objective
ranges; the ranges are tightened with the coverage-derived bounds; an
equidistant grid of bound vectors is enumerated over the non-primary
objectives; each grid point is solved through the augmented scalarization
(primary objective minus small slack rewards, one pinned row per bounded
objective); and two early-detection filters drop grid points that are
provably infeasible or provably reproduce an already-found solution.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (DegenerateAxis, EmptyRange, InfeasibleModel,
                     NumericalBreakdown)
from .lp import REL_EQ, REL_LE, LpProblem, LpStatus
from .simplex import DEFAULT_TOLERANCES, SolverTolerances, solve

WAVE_CSV_COLUMNS = ("n_eps", "n_sol", "pct_sol", "pct_infeas",
                    "pct_omit_in_infeas", "pct_omit_for_infeas",
                    "pct_omit_for_repeat", "unit_time_s", "total_time_s")


# --- generic multiobjective LP host ---------------------------------------


@dataclass(frozen=True)
class LinearMop:
    """A plain linear multiobjective problem: used by tests and utilities.

    ``objectives`` is a (p, n) matrix of objective rows over the problem
    variables.
    """

    problem: LpProblem
    objectives: np.ndarray

    @property
    def n_objectives(self):
        return self.objectives.shape[0]

    def objective_selector(self, i):
        return self.objectives[i].astype(float).copy()

    def objective_values(self, x):
        return self.objectives @ x

    def describe_solution(self, x, eps, phase_tag):
        return {"x": np.asarray(x).copy(), "phase": phase_tag}


# --- ranges and payoff table -----------------------------------------------


@dataclass(frozen=True)
class ObjectiveRanges:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise EmptyRange(f"objective {bad + 1}: lower bound "
                             f"{self.lower[bad]:g} above upper "
                             f"{self.upper[bad]:g}")

    @property
    def widths(self):
        return self.upper - self.lower

    def snapped(self, rel: float = 1e-9) -> "ObjectiveRanges":
        """Collapse axes whose width is solver noise rather than a range."""
        lower = self.lower.copy()
        upper = self.upper.copy()
        scale = np.maximum(1.0, np.maximum(np.abs(lower), np.abs(upper)))
        tiny = (upper - lower) <= rel * scale
        upper[tiny] = lower[tiny]
        return ObjectiveRanges(lower, upper)


@dataclass(frozen=True)
class PayoffTable:
    values: np.ndarray          # values[k, i] = objective i after pass k
    order_policy: str = "cyclic"

    def ranges(self) -> ObjectiveRanges:
        return ObjectiveRanges(self.values.min(axis=0).copy(),
                               self.values.max(axis=0).copy())


def payoff_table(mop, order_policy: str = "cyclic",
                 fix_tol: float = 1e-9,
                 solver_tol: SolverTolerances | None = None):
    """Lexicographic payoff table: one pass per leading objective.

    Pass k optimizes objectives in cyclic order k, k+1, ..., k-1, pinning
    each optimum with an extra row before the next solve, so every row of
    the table is a nondominated point.
    """
    if order_policy != "cyclic":
        raise ValueError(f"unknown order policy {order_policy!r}")
    p = mop.n_objectives
    z = np.zeros((p, p))
    for k in range(p):
        prob = mop.problem
        for i in (np.arange(p) + k) % p:
            out = solve(prob.with_objective(mop.objective_selector(i)),
                        solver_tol)
            if out.status is LpStatus.INFEASIBLE:
                raise InfeasibleModel(
                    "base model infeasible during payoff pass")
            if out.status is not LpStatus.OPTIMAL:
                raise NumericalBreakdown(
                    f"payoff pass found {out.status.value} model")
            z[k, i] = out.value
            pin = np.zeros((1, prob.n_cols))
            pin[0] = mop.objective_selector(i)
            prob = prob.add_rows(
                pin, [REL_LE], [out.value + fix_tol * max(1.0, abs(out.value))])
    table = PayoffTable(values=z, order_policy=order_policy)
    return table, table.ranges()


def tighten_ranges(ranges: ObjectiveRanges, instance,
                   cov_min: float = 0.98) -> ObjectiveRanges:
    """Coverage-implied caps: shrink the underdose ceiling and raise the
    beam-on-time floor.

    A plan covering a cov_min fraction of each tumor leaves at most
    D |V| (1 - cov_min) total underdose, and must keep the beam on at
    least D cov_min / (max rate * sectors) minutes for the hottest tumor.
    """
    if not 0.0 < cov_min <= 1.0:
        raise ValueError("cov_min must be in (0, 1]")
    lower = ranges.lower.copy()
    upper = ranges.upper.copy()
    under_cap = sum(instance.prescriptions[t.name] * t.n_voxels
                    for t in instance.tumors) * (1.0 - cov_min)
    upper[3] = min(upper[3], under_cap)
    max_rate = instance.max_dose_rate()
    bot_floor = max(instance.prescriptions[t.name] * cov_min
                    / (max_rate * instance.n_sectors)
                    for t in instance.tumors)
    lower[4] = max(lower[4], bot_floor)
    if np.any(lower > upper):
        bad = int(np.argmax(lower > upper))
        raise EmptyRange(f"objective {bad + 1}: tightening produced "
                         f"[{lower[bad]:g}, {upper[bad]:g}]")
    return ObjectiveRanges(lower, upper)


# --- grid ------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class EpsVector:
    """One bound vector: values and grid coordinates per bounded axis."""

    values: tuple
    coords: tuple


def grid_axes(ranges: ObjectiveRanges, r, bounded,
              allow_collapse: bool = True):
    """Equidistant values per bounded axis; zero-width axes collapse."""
    if np.isscalar(r):
        r = {i: int(r) for i in bounded}
    axes = []
    for i in bounded:
        lo, hi = float(ranges.lower[i]), float(ranges.upper[i])
        points = int(r[i])
        if points < 1:
            raise ValueError(f"objective {i + 1}: need at least one point")
        if hi - lo == 0.0:
            if points > 1 and not allow_collapse:
                raise DegenerateAxis(
                    f"objective {i + 1}: zero-width range with r > 1")
            axes.append([lo])
            continue
        if points == 1:
            raise DegenerateAxis(
                f"objective {i + 1}: r = 1 on a nonzero-width range")
        axes.append([lo + j * (hi - lo) / (points - 1)
                     for j in range(points)])
    return axes


def build_grid(ranges: ObjectiveRanges, r, bounded,
               allow_collapse: bool = True) -> list[EpsVector]:
    """Cartesian grid in lexicographic coordinate order."""
    axes = grid_axes(ranges, r, bounded, allow_collapse)
    coord_space = [range(len(a)) for a in axes]
    out = []
    for coords in itertools.product(*coord_space):
        values = tuple(axes[a][j] for a, j in enumerate(coords))
        out.append(EpsVector(values=values, coords=coords))
    return out


# --- augmented scalarization ------------------------------------------------


# bound-vector solves square the reduced-cost tolerance margin: the slack
# rewards are beta-scaled, and certifying their optimum at 1e-7 leaves
# weakly-efficient points behind
EPS_SOLVER_TOLERANCES = SolverTolerances(opt=1e-9)


@dataclass(frozen=True)
class EpsConfig:
    """Knobs shared by single bound-vector solves and wave runs."""

    ranges: ObjectiveRanges
    primary: int = 0
    beta: float = 1e-4
    filters: bool = True
    jobs: int = 1
    bind_tol: float = 1e-6
    solver_tol: SolverTolerances = EPS_SOLVER_TOLERANCES
    phase_tag: str = "phase1"
    allow_collapse: bool = True

    @property
    def bounded(self):
        return tuple(i for i in range(self.ranges.lower.shape[0])
                     if i != self.primary)


@dataclass(frozen=True)
class EpsOutcome:
    status: str                      # "solved" | "infeasible"
    eps: EpsVector
    objectives: np.ndarray | None = None   # recomputed, full length p
    plan: object = None
    slacks: dict | None = None       # bounded objective index -> slack
    nonbinding: tuple = ()           # bounded objective indexes with slack
    solve_seconds: float = 0.0
    lp_iterations: int = 0


class Scalarizer:
    """Caches the augmented problem; per-vector solves only move the rhs.

    The slack of each bounded row is expressed in range-width units
    (column coefficient delta_i), which keeps every slack reward at -beta
    in the objective regardless of how wide the ranges are.  Zero-width
    axes get a pinned equality with a frozen slack instead: a collapsed
    axis carries no trade-off to reward.
    """

    def __init__(self, mop, config: EpsConfig):
        if config.beta <= 0.0:
            raise ValueError("beta must be strictly positive")
        self.mop = mop
        self.config = config
        base = mop.problem
        bounded = config.bounded
        widths = config.ranges.widths
        n = base.n_cols
        extra = len(bounded)
        rows = np.zeros((extra, n + extra))
        rhs = np.zeros(extra)
        cost = np.zeros(n + extra)
        cost[:n] = mop.objective_selector(config.primary)
        self.y_cols = {}
        self.delta = {}
        scale = np.maximum(1.0, np.maximum(np.abs(config.ranges.lower),
                                           np.abs(config.ranges.upper)))
        for pos, i in enumerate(bounded):
            delta = float(widths[i])
            if delta <= 1e-9 * scale[i]:
                delta = 0.0  # noise-width axis: pin it
            rows[pos, :n] = mop.objective_selector(i)
            rows[pos, n + pos] = delta if delta > 0.0 else 1.0
            self.y_cols[i] = n + pos
            self.delta[i] = delta
            if delta > 0.0:
                cost[n + pos] = -config.beta
        lower = np.concatenate([base.lower, np.zeros(extra)])
        upper = np.concatenate([base.upper, np.full(extra, np.inf)])
        for pos, i in enumerate(bounded):
            if self.delta[i] == 0.0:
                upper[n + pos] = 0.0  # pinned: f_i = eps_i exactly
        A = sp.vstack([
            sp.hstack([base.A, sp.csr_matrix((base.n_rows, extra))],
                      format="csr"),
            sp.csr_matrix(rows)], format="csr")
        relations = np.concatenate(
            [base.relations, np.full(extra, REL_EQ, dtype=np.int8)])
        rhs_full = np.concatenate([base.rhs, rhs])
        self.problem = LpProblem(cost, A, relations, rhs_full, lower, upper)
        self.eps_rows = {i: base.n_rows + pos
                         for pos, i in enumerate(bounded)}
        self.n_base_cols = n

    def problem_for(self, eps: EpsVector) -> LpProblem:
        for pos, i in enumerate(self.config.bounded):
            self.problem.rhs[self.eps_rows[i]] = eps.values[pos]
        return self.problem

    def solve(self, eps: EpsVector) -> EpsOutcome:
        t0 = time.perf_counter()
        out = solve(self.problem_for(eps), self.config.solver_tol)
        dt = time.perf_counter() - t0
        if out.status is LpStatus.INFEASIBLE:
            return EpsOutcome(status="infeasible", eps=eps,
                              solve_seconds=dt, lp_iterations=out.iterations)
        if out.status is not LpStatus.OPTIMAL:
            raise NumericalBreakdown(
                f"bound-vector solve returned {out.status.value}")
        x = out.x[:self.n_base_cols]
        objectives = np.asarray(self.mop.objective_values(x), dtype=float)
        slacks = {}
        for pos, i in enumerate(self.config.bounded):
            scale = self.delta[i] if self.delta[i] > 0.0 else 1.0
            slacks[i] = float(out.x[self.y_cols[i]]) * scale
        nonbinding = tuple(i for i in self.config.bounded
                           if slacks[i] > self.config.bind_tol)
        plan = self.mop.describe_solution(x, eps, self.config.phase_tag)
        return EpsOutcome(status="solved", eps=eps, objectives=objectives,
                          plan=plan, slacks=slacks, nonbinding=nonbinding,
                          solve_seconds=dt, lp_iterations=out.iterations)


def augment(mop, primary_index: int, eps: EpsVector, beta: float,
            ranges: ObjectiveRanges) -> LpProblem:
    """One-off augmented problem for a single bound vector."""
    config = EpsConfig(ranges=ranges, primary=primary_index, beta=beta)
    scal = Scalarizer(mop, config)
    prob = scal.problem_for(eps)
    return prob.copy()


def solve_eps(mop, eps: EpsVector, config: EpsConfig) -> EpsOutcome:
    """Solve a single bound vector through the augmented scalarization."""
    return Scalarizer(mop, config).solve(eps)


# --- early-detection filters -------------------------------------------------


def retain_after_infeasible(pending, eps_infeas: EpsVector):
    """Drop pending vectors at least as restrictive on every axis.

    Returns (retained, removed).  Removal is sound because shrinking every
    bound of an infeasible vector cannot restore feasibility.
    """
    retained, removed = [], []
    ref = eps_infeas.coords
    for eps in pending:
        if any(c > rc for c, rc in zip(eps.coords, ref)):
            retained.append(eps)
        else:
            removed.append(eps)
    return retained, removed


def retain_after_solution(pending, outcome: EpsOutcome, bounded):
    """Drop pending vectors that provably reproduce the found solution.

    A pending vector reproduces the optimum when every nonbinding axis
    keeps the found objective value feasible and every binding axis sits
    on exactly the same grid line (coordinate equality, no float compare).
    Returns (retained, removed).
    """
    if not outcome.nonbinding:
        return list(pending), []
    axis_pos = {i: pos for pos, i in enumerate(bounded)}
    retained, removed = [], []
    hhat = outcome.objectives
    ref = outcome.eps.coords
    for eps in pending:
        keep = False
        for i in bounded:
            pos = axis_pos[i]
            if i in outcome.nonbinding:
                if eps.values[pos] < hhat[i]:
                    keep = True
                    break
            elif eps.coords[pos] != ref[pos]:
                keep = True
                break
        (retained if keep else removed).append(eps)
    return retained, removed


# --- archive -----------------------------------------------------------------


@dataclass
class ArchiveEntry:
    objectives: np.ndarray
    plan: object
    eps: EpsVector | None
    phase: str
    repeat_hits: int = 0


def dominates(a, b, tol: float = 1e-9) -> bool:
    """Componentwise <= with at least one strict <, up to tol."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b + tol) and np.any(a < b - tol))


class ParetoArchive:
    """Solutions deduplicated on their objective vectors.

    Re-finding a stored vector bumps its repeat counter instead of adding
    a row; `finalize` prunes any entry whose vector is dominated by
    another (none is expected from correct runs, so the pruned count is
    reported for auditing).
    """

    def __init__(self, dedup_tol: float = 1e-6):
        self.entries: list[ArchiveEntry] = []
        self.dedup_tol = dedup_tol
        self.pruned = 0

    def __len__(self):
        return len(self.entries)

    def find(self, objectives):
        objectives = np.asarray(objectives)
        for entry in self.entries:
            if np.all(np.abs(entry.objectives - objectives)
                      <= self.dedup_tol):
                return entry
        return None

    def add(self, objectives, plan, eps, phase):
        """Insert or count a repeat; returns (entry, is_new)."""
        found = self.find(objectives)
        if found is not None:
            found.repeat_hits += 1
            return found, False
        entry = ArchiveEntry(objectives=np.asarray(objectives, dtype=float),
                             plan=plan, eps=eps, phase=phase)
        self.entries.append(entry)
        return entry, True

    def merge(self, other: "ParetoArchive"):
        for entry in other.entries:
            kept, is_new = self.add(entry.objectives, entry.plan,
                                    entry.eps, entry.phase)
            if not is_new:
                kept.repeat_hits += entry.repeat_hits
            else:
                kept.repeat_hits = entry.repeat_hits
        return self

    def objective_matrix(self):
        if not self.entries:
            return np.zeros((0, 0))
        return np.vstack([e.objectives for e in self.entries])

    def finalize(self):
        """Drop dominated entries; returns the number pruned."""
        keep = []
        for i, e in enumerate(self.entries):
            if any(dominates(o.objectives, e.objectives)
                   for j, o in enumerate(self.entries) if j != i):
                continue
            keep.append(e)
        self.pruned += len(self.entries) - len(keep)
        self.entries = keep
        return self.pruned


# --- wave loop ----------------------------------------------------------------


@dataclass
class WaveRecord:
    eps: EpsVector
    kind: str                       # solved | infeasible | omitted_infeasible | omitted_repeat
    objectives: np.ndarray | None = None
    plan: object = None


@dataclass
class WaveStats:
    n_eps: int = 0
    n_sol: int = 0
    n_infeasible_solved: int = 0
    n_omitted_infeasible: int = 0
    n_omitted_repeat: int = 0
    solve_seconds: float = 0.0
    aborted: bool = False
    records: list = field(default_factory=list)
    # vectors outside the scan that the filters labeled for free, and the
    # ones still unknown afterwards
    shadow_records: list = field(default_factory=list)
    shadow_remaining: list = field(default_factory=list)

    @property
    def n_solved_models(self):
        return self.n_sol + self.n_infeasible_solved

    @property
    def n_infeasible_total(self):
        return self.n_infeasible_solved + self.n_omitted_infeasible

    def _pct(self, num, den):
        return 100.0 * num / den if den else 0.0

    @property
    def pct_sol(self):
        return self._pct(self.n_sol, self.n_eps)

    @property
    def pct_infeas(self):
        return self._pct(self.n_infeasible_total, self.n_eps)

    @property
    def pct_omit_in_infeas(self):
        return self._pct(self.n_omitted_infeasible, self.n_infeasible_total)

    @property
    def pct_omit_for_infeas(self):
        return self._pct(self.n_omitted_infeasible, self.n_eps)

    @property
    def pct_omit_for_repeat(self):
        return self._pct(self.n_omitted_repeat, self.n_eps)

    @property
    def unit_time_s(self):
        return self.solve_seconds / self.n_sol if self.n_sol else 0.0

    @property
    def total_time_s(self):
        return self.solve_seconds

    def to_csv_row(self):
        return {"n_eps": self.n_eps, "n_sol": self.n_sol,
                "pct_sol": round(self.pct_sol, 1),
                "pct_infeas": round(self.pct_infeas, 1),
                "pct_omit_in_infeas": round(self.pct_omit_in_infeas, 1),
                "pct_omit_for_infeas": round(self.pct_omit_for_infeas, 1),
                "pct_omit_for_repeat": round(self.pct_omit_for_repeat, 1),
                "unit_time_s": round(self.unit_time_s, 4),
                "total_time_s": round(self.total_time_s, 4)}


def wave_order(grid):
    """Loosest corner first: large slack sets feed the repeat filter early."""
    return sorted(grid, key=lambda e: e.coords, reverse=True)


def run_wave(mop, grid, config: EpsConfig, on_event=None,
             archive: ParetoArchive | None = None, shadow=None):
    """Scan a grid of bound vectors, filtering as results arrive.

    Returns (archive, stats).  With ``config.jobs > 1``, up to that many
    vectors are solved concurrently between filter applications; outcomes
    are then folded in deterministic batch order, so the archive content
    matches the sequential run.  Vectors in ``shadow`` are never solved,
    but the filters scan them too: matches become labeled records
    (``stats.shadow_records``) and the rest stay in
    ``stats.shadow_remaining`` — this is how the prediction variant mines
    training labels from the part of the grid it skips.
    """
    stats = WaveStats(n_eps=len(grid))
    shadow = list(shadow) if shadow else []
    archive = archive if archive is not None else ParetoArchive()
    # rhs mutation makes one shared scalarizer races-prone under jobs > 1;
    # keep one augmented problem per worker slot instead
    jobs = max(1, config.jobs)
    scal_pool = [Scalarizer(mop, config) for _ in range(jobs)]
    pending = wave_order(grid)

    def emit(record):
        stats.records.append(record)
        if on_event is not None:
            on_event(record)

    try:
        while pending:
            batch = pending[:jobs]
            pending = pending[len(batch):]
            if len(batch) > 1:
                with ThreadPoolExecutor(max_workers=len(batch)) as pool:
                    outcomes = list(pool.map(
                        lambda pair: pair[0].solve(pair[1]),
                        zip(scal_pool, batch)))
            else:
                outcomes = [scal_pool[0].solve(batch[0])]
            for outcome in outcomes:
                stats.solve_seconds += outcome.solve_seconds
                if outcome.status == "infeasible":
                    stats.n_infeasible_solved += 1
                    emit(WaveRecord(eps=outcome.eps, kind="infeasible"))
                    if config.filters:
                        pending, removed = retain_after_infeasible(
                            pending, outcome.eps)
                        stats.n_omitted_infeasible += len(removed)
                        for eps in removed:
                            emit(WaveRecord(eps=eps,
                                            kind="omitted_infeasible"))
                        shadow, shadow_removed = retain_after_infeasible(
                            shadow, outcome.eps)
                        for eps in shadow_removed:
                            stats.shadow_records.append(WaveRecord(
                                eps=eps, kind="omitted_infeasible"))
                    continue
                stats.n_sol += 1
                archive.add(outcome.objectives, outcome.plan, outcome.eps,
                            config.phase_tag)
                emit(WaveRecord(eps=outcome.eps, kind="solved",
                                objectives=outcome.objectives,
                                plan=outcome.plan))
                if config.filters:
                    pending, removed = retain_after_solution(
                        pending, outcome, config.bounded)
                    stats.n_omitted_repeat += len(removed)
                    for eps in removed:
                        # proven duplicate: reuse the criteria just found
                        emit(WaveRecord(eps=eps, kind="omitted_repeat",
                                        objectives=outcome.objectives,
                                        plan=outcome.plan))
                    shadow, shadow_removed = retain_after_solution(
                        shadow, outcome, config.bounded)
                    for eps in shadow_removed:
                        stats.shadow_records.append(WaveRecord(
                            eps=eps, kind="omitted_repeat",
                            objectives=outcome.objectives,
                            plan=outcome.plan))
    except NumericalBreakdown:
        stats.aborted = True
    stats.shadow_remaining = shadow
    return archive, stats
