"""Two-phase plan search: broad scan, then a refocused scan.

Phase I covers the full objective ranges.  Phase II reads the clinical
scores of the Phase-I solutions, keeps those meeting the coverage /
conformity thresholds and the beam-on-time quartile cut, and rebuilds the
ranges from that subset, so the second grid lands where plans are worth
having.  The prediction-guided mode replaces exhaustive scanning with
tree-ensemble forecasts: solve a random slice of the Phase-I grid, learn
feasibility and the three clinical scores from it, and only solve the
vectors predicted to be worthwhile (plus a domination cut on the
predicted scores).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

from .epsilon import (EPS_SOLVER_TOLERANCES, EpsConfig, ObjectiveRanges,
                      ParetoArchive, build_grid, payoff_table, run_wave,
                      tighten_ranges)
from .errors import EmptyRange, InsufficientSample, NoQualifyingSolutions
from .forest import ForestHyper, cross_validate, train_forest
from .model import MolpModel, build_molp
from .simplex import DEFAULT_TOLERANCES, SolverTolerances, solve


@dataclass(frozen=True)
class TwoPhaseConfig:
    cov_min: float = 0.98
    pci_min: float = 0.75
    bot_max_policy: str = "first_quartile"
    r_phase1: int = 10
    r_phase2: int = 5
    rho: float = 0.10              # Phase-I sample fraction in ml mode
    bot_hard_cap_min: float = 180.0
    mode: str = "regular"          # "regular" | "ml"
    beta: float = 1e-4
    seed: int = 0
    primary: int = 0               # ring overdose by default
    jobs: int = 1
    filters: bool = True
    min_ml_sample: int = 30
    forest: ForestHyper = field(default_factory=ForestHyper)
    solver_tol: SolverTolerances = EPS_SOLVER_TOLERANCES
    # selection hedges absorb forecast error so near-threshold vectors
    # are not discarded on a small regression miss
    hedge_cov: float = 0.01
    hedge_pci: float = 0.02
    hedge_bot: float = 0.10       # relative slack on the beam-on-time cut

    def __post_init__(self):
        if not 0.0 < self.cov_min <= 1.0:
            raise ValueError("cov_min must be in (0, 1]")
        if not 0.0 <= self.pci_min <= 1.0:
            raise ValueError("pci_min must be in [0, 1]")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must be in (0, 1]")
        if self.mode not in ("regular", "ml"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.primary < 5:
            raise ValueError("primary objective index out of range")


@dataclass(frozen=True)
class CriteriaRecord:
    eps: object
    cov: float
    pci: float
    bot: float
    objectives: np.ndarray
    phase: str
    predicted: bool = False


def records_from_archive(archive: ParetoArchive):
    out = []
    for entry in archive.entries:
        crit = entry.plan.criteria
        out.append(CriteriaRecord(eps=entry.eps, cov=crit.cov, pci=crit.pci,
                                  bot=crit.bot_min,
                                  objectives=entry.objectives,
                                  phase=entry.phase))
    return out


def nd_filter(records, key=None):
    """Keep records whose (cov, pci, bot) no other record weakly beats.

    Higher coverage and conformity are better; lower beam-on time is
    better.  A record survives unless some other record is at least as
    good on all three and strictly better on one.
    """
    if key is None:
        key = lambda r: (r.cov, r.pci, r.bot)
    if not records:
        return []
    triples = np.array([key(r) for r in records], dtype=float)
    cov, pci, bot = triples[:, 0], triples[:, 1], triples[:, 2]
    keep = []
    for j in range(len(records)):
        at_least = (cov >= cov[j]) & (pci >= pci[j]) & (bot <= bot[j])
        strictly = (cov > cov[j]) | (pci > pci[j]) | (bot < bot[j])
        if not np.any(at_least & strictly):
            keep.append(records[j])
    return keep


def phase2_ranges(records, config: TwoPhaseConfig):
    """Objective ranges spanned by the threshold-passing Phase-I results.

    The beam-on-time cut is the first quartile (linear interpolation) of
    the records that already pass the coverage and conformity thresholds.
    Returns (ranges, bot_max).
    """
    passing = [r for r in records if r.cov >= config.cov_min
               and r.pci >= config.pci_min]
    if not passing:
        raise NoQualifyingSolutions(
            f"no Phase-I solution reaches cov >= {config.cov_min} "
            f"and pci >= {config.pci_min}")
    if config.bot_max_policy != "first_quartile":
        raise ValueError(f"unknown policy {config.bot_max_policy!r}")
    bot_max = float(np.percentile([r.bot for r in passing], 25))
    selected = [r for r in passing if r.bot <= bot_max + 1e-12]
    stack = np.vstack([r.objectives for r in selected])
    ranges = ObjectiveRanges(stack.min(axis=0), stack.max(axis=0)).snapped()
    return ranges, bot_max


# --- reporting ----------------------------------------------------------------


@dataclass
class PhaseReport:
    name: str
    grid_size: int
    ranges_lower: list
    ranges_upper: list
    stats: object
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return {"name": self.name, "grid_size": self.grid_size,
                "ranges_lower": self.ranges_lower,
                "ranges_upper": self.ranges_upper,
                "stats": self.stats.to_csv_row(), **self.extras}


@dataclass
class RunReport:
    mode: str
    seed: int
    thresholds: dict
    payoff: list
    phases: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    prediction: dict | None = None
    wall_seconds: float = 0.0
    payoff_solves: int = 0
    eps_lp_solves: int = 0
    archive_size: int = 0
    pruned: int = 0

    def to_json(self):
        return {"mode": self.mode, "seed": self.seed,
                "thresholds": self.thresholds, "payoff": self.payoff,
                "phases": [p.to_json() for p in self.phases],
                "warnings": self.warnings, "prediction": self.prediction,
                "wall_seconds": round(self.wall_seconds, 3),
                "payoff_solves": self.payoff_solves,
                "eps_lp_solves": self.eps_lp_solves,
                "archive_size": self.archive_size, "pruned": self.pruned}


class _PredictionAudit:
    """Predicted-vs-realized feasibility bookkeeping across stages."""

    def __init__(self):
        self.predicted = {}   # (stage, coords) -> bool
        self.truth = {}       # (stage, coords) -> bool

    def log_predictions(self, stage, eps_list, flags):
        for eps, flag in zip(eps_list, flags):
            self.predicted[(stage, eps.coords)] = bool(flag)

    def log_records(self, stage, records):
        feasible_kinds = {"solved", "omitted_repeat"}
        infeasible_kinds = {"infeasible", "omitted_infeasible"}
        for rec in records:
            if rec.kind in feasible_kinds:
                self.truth[(stage, rec.eps.coords)] = True
            elif rec.kind in infeasible_kinds:
                self.truth[(stage, rec.eps.coords)] = False

    def summary(self, labeled=None, config=None):
        keys = [k for k in self.predicted if k in self.truth]
        correct = sum(self.predicted[k] == self.truth[k] for k in keys)
        out = {"n_predicted": len(self.predicted),
               "n_checked": len(keys),
               "n_correct": int(correct),
               "accuracy": (correct / len(keys)) if keys else None,
               "accuracy_cv": None}
        if labeled:
            # repeated k-fold score on the collected feasibility labels:
            # robust when few selected vectors were actually solved
            X = np.array([row[0] for row in labeled], dtype=float)
            y = np.array([row[1] for row in labeled], dtype=int)
            if X.shape[0] >= 10:
                cv = cross_validate(X, y, config.forest, k=5, reps=2,
                                    seed=config.seed, mode="classify")
                out["accuracy_cv"] = cv["accuracy"]
        return out


# --- shared plumbing ----------------------------------------------------------


def _apply_bot_cap(ranges: ObjectiveRanges, cap: float) -> ObjectiveRanges:
    if cap is None or not np.isfinite(cap):
        return ranges
    if ranges.lower[4] > cap:
        raise EmptyRange(f"beam-on-time floor {ranges.lower[4]:g} exceeds "
                         f"the hard cap {cap:g}")
    upper = ranges.upper.copy()
    upper[4] = min(upper[4], cap)
    return ObjectiveRanges(ranges.lower.copy(), upper)


def _prepare(instance, config: TwoPhaseConfig):
    model = build_molp(instance, config.cov_min)
    table, raw_ranges = payoff_table(model, solver_tol=config.solver_tol)
    ranges = tighten_ranges(raw_ranges, instance, config.cov_min)
    ranges = _apply_bot_cap(ranges, config.bot_hard_cap_min).snapped()
    cfg = EpsConfig(ranges=ranges, primary=config.primary, beta=config.beta,
                    filters=config.filters, jobs=config.jobs,
                    solver_tol=config.solver_tol, phase_tag="phase1")
    return model, table, ranges, cfg


def _phase_report(name, grid, ranges, stats, **extras):
    return PhaseReport(name=name, grid_size=len(grid),
                       ranges_lower=list(map(float, ranges.lower)),
                       ranges_upper=list(map(float, ranges.upper)),
                       stats=stats, extras=extras)


def _finish(report, archive, t0):
    report.pruned = archive.finalize()
    report.archive_size = len(archive)
    report.eps_lp_solves = sum(p.stats.n_solved_models
                               for p in report.phases)
    report.wall_seconds = time.perf_counter() - t0
    return archive, report


def _base_report(config: TwoPhaseConfig, table):
    return RunReport(
        mode=config.mode, seed=config.seed,
        thresholds={"cov_min": config.cov_min, "pci_min": config.pci_min,
                    "bot_max_policy": config.bot_max_policy,
                    "bot_hard_cap_min": config.bot_hard_cap_min,
                    "r_phase1": config.r_phase1,
                    "r_phase2": config.r_phase2, "rho": config.rho,
                    "beta": config.beta, "primary": config.primary},
        payoff=[[float(v) for v in row] for row in table.values],
        payoff_solves=table.values.size)


# --- regular mode ---------------------------------------------------------------


def run_regular(instance, config: TwoPhaseConfig):
    """Full grid in Phase I, refocused grid in Phase II."""
    t0 = time.perf_counter()
    model, table, ranges1, cfg1 = _prepare(instance, config)
    report = _base_report(config, table)

    grid1 = build_grid(ranges1, config.r_phase1, cfg1.bounded)
    log.info("phase1: %d bound vectors", len(grid1))
    archive = ParetoArchive()
    archive, stats1 = run_wave(model, grid1, cfg1, archive=archive)
    log.info("phase1: %d solutions from %d solves", stats1.n_sol,
             stats1.n_solved_models)
    report.phases.append(_phase_report("phase1", grid1, ranges1, stats1))

    try:
        ranges2, bot_max = phase2_ranges(records_from_archive(archive),
                                         config)
    except NoQualifyingSolutions as exc:
        report.warnings.append({"code": "no_qualifying_solutions",
                                "message": str(exc)})
        return _finish(report, archive, t0)

    grid2 = build_grid(ranges2, config.r_phase2, cfg1.bounded)
    log.info("phase2: %d bound vectors, beam-time cut %.1f min",
             len(grid2), bot_max)
    cfg2 = replace(cfg1, ranges=ranges2, phase_tag="phase2")
    archive, stats2 = run_wave(model, grid2, cfg2, archive=archive)
    log.info("phase2: %d solutions from %d solves", stats2.n_sol,
             stats2.n_solved_models)
    report.phases.append(_phase_report("phase2", grid2, ranges2, stats2,
                                       bot_max=bot_max))
    return _finish(report, archive, t0)


# --- prediction-guided mode ------------------------------------------------------


def _labels_from_records(records):
    """(features, feasibility flag, criteria triple or None) per record."""
    out = []
    for rec in records:
        if rec.kind in ("solved", "omitted_repeat"):
            crit = rec.plan.criteria
            out.append((rec.eps.values, 1,
                        (crit.cov, crit.pci, crit.bot_min)))
        elif rec.kind in ("infeasible", "omitted_infeasible"):
            out.append((rec.eps.values, 0, None))
    return out


def _train_predictors(labeled, config: TwoPhaseConfig, stage: int):
    """Feasibility classifier + one regressor per clinical score."""
    feas_X = np.array([row[0] for row in labeled], dtype=float)
    feas_y = np.array([row[1] for row in labeled], dtype=int)
    crit_rows = [(row[0], row[2]) for row in labeled if row[2] is not None]
    seeds = np.random.SeedSequence([config.seed, stage]).generate_state(4)
    models = {"feas": train_forest(feas_X, feas_y, config.forest,
                                   seed=int(seeds[0]), mode="classify")}
    if crit_rows:
        cX = np.array([r[0] for r in crit_rows], dtype=float)
        crit = np.array([r[1] for r in crit_rows], dtype=float)
        for pos, name in enumerate(("cov", "pci", "bot")):
            models[name] = train_forest(cX, crit[:, pos], config.forest,
                                        seed=int(seeds[pos + 1]),
                                        mode="regress")
    return models


@dataclass(frozen=True)
class _Predicted:
    eps: object
    cov: float
    pci: float
    bot: float


def _predict_select(models, candidates, config: TwoPhaseConfig,
                    bot_max: float, audit: _PredictionAudit, stage: str):
    """Keep candidates forecast feasible and clinically worthwhile,
    then apply the domination cut on the forecast scores."""
    if not candidates:
        return []
    X = np.array([eps.values for eps in candidates], dtype=float)
    feas = models["feas"].predict(X).astype(bool)
    audit.log_predictions(stage, candidates, feas)
    if "cov" not in models:  # nothing feasible yet to learn scores from
        return []
    cov = models["cov"].predict(X)
    pci = models["pci"].predict(X)
    bot = models["bot"].predict(X)
    cov_cut = config.cov_min - config.hedge_cov
    pci_cut = config.pci_min - config.hedge_pci
    bot_cut = bot_max * (1.0 + config.hedge_bot)
    picked = [_Predicted(eps=c, cov=float(cov[i]), pci=float(pci[i]),
                         bot=float(bot[i]))
              for i, c in enumerate(candidates)
              if feas[i] and cov[i] >= cov_cut
              and pci[i] >= pci_cut and bot[i] <= bot_cut]
    survivors = nd_filter(picked)
    return [p.eps for p in survivors]


def run_ml(instance, config: TwoPhaseConfig):
    """Prediction-guided run: sample, learn, solve only promising vectors."""
    t0 = time.perf_counter()
    model, table, ranges1, cfg1 = _prepare(instance, config)
    report = _base_report(config, table)
    audit = _PredictionAudit()

    grid1 = build_grid(ranges1, config.r_phase1, cfg1.bounded)
    sample_size = min(len(grid1), int(round(config.rho * len(grid1))))
    if config.rho < 1.0 and sample_size < config.min_ml_sample:
        raise InsufficientSample(
            f"rho={config.rho} yields {sample_size} samples; "
            f"need at least {config.min_ml_sample}")
    rng = np.random.default_rng(config.seed)
    picked = set(map(int, rng.choice(len(grid1), size=sample_size,
                                     replace=False)))
    sampled = [grid1[i] for i in sorted(picked)]
    unsampled = [grid1[i] for i in range(len(grid1)) if i not in picked]

    log.info("phase1 sample: %d of %d bound vectors", len(sampled),
             len(grid1))
    archive = ParetoArchive()
    archive, stats1 = run_wave(model, sampled, cfg1, archive=archive,
                               shadow=unsampled)
    audit.log_records("phase1", stats1.records + stats1.shadow_records)
    report.phases.append(_phase_report(
        "phase1_sample", sampled, ranges1, stats1,
        sampled=len(sampled), grid_total=len(grid1)))
    labeled = _labels_from_records(stats1.records + stats1.shadow_records)

    candidates = stats1.shadow_remaining
    if candidates:
        models = _train_predictors(labeled, config, stage=1)
        # beam-on-time threshold is left wide open in Phase I: any
        # coverage/conformity-worthy vector deserves a look
        selected = _predict_select(models, candidates, config,
                                   bot_max=np.inf, audit=audit,
                                   stage="phase1")
        log.info("phase1 round 2: %d of %d candidates forecast worthwhile",
                 len(selected), len(candidates))
        cfg1b = replace(cfg1, phase_tag="phase1_ml")
        leftover = [eps for eps in candidates
                    if eps not in set(selected)]
        archive, stats1b = run_wave(model, selected, cfg1b, archive=archive,
                                    shadow=leftover)
        audit.log_records("phase1",
                          stats1b.records + stats1b.shadow_records)
        report.phases.append(_phase_report(
            "phase1_ml", selected, ranges1, stats1b,
            candidates=len(candidates)))
        labeled += _labels_from_records(stats1b.records
                                        + stats1b.shadow_records)

    try:
        ranges2, bot_max = phase2_ranges(records_from_archive(archive),
                                         config)
    except NoQualifyingSolutions as exc:
        report.warnings.append({"code": "no_qualifying_solutions",
                                "message": str(exc)})
        report.prediction = audit.summary(labeled, config)
        return _finish(report, archive, t0)

    grid2 = build_grid(ranges2, config.r_phase2, cfg1.bounded)
    models2 = _train_predictors(labeled, config, stage=2)
    selected2 = _predict_select(models2, grid2, config, bot_max=bot_max,
                                audit=audit, stage="phase2")
    cfg2 = replace(cfg1, ranges=ranges2, phase_tag="phase2")
    leftover2 = [eps for eps in grid2 if eps not in set(selected2)]
    archive, stats2 = run_wave(model, selected2, cfg2, archive=archive,
                               shadow=leftover2)
    audit.log_records("phase2", stats2.records + stats2.shadow_records)
    report.phases.append(_phase_report(
        "phase2", selected2, ranges2, stats2,
        bot_max=bot_max, candidates=len(grid2)))
    report.prediction = audit.summary(labeled, config)
    return _finish(report, archive, t0)


def run(instance, config: TwoPhaseConfig):
    """Dispatch on config.mode."""
    if config.mode == "ml":
        return run_ml(instance, config)
    return run_regular(instance, config)


# --- weighted-sum comparison point ----------------------------------------------


def solve_weighted(model: MolpModel, weights,
                   solver_tol: SolverTolerances = DEFAULT_TOLERANCES):
    """Single plan minimizing a nonnegative weighted sum of the objectives."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (model.n_objectives,):
        raise ValueError(f"need {model.n_objectives} weights")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    cost = np.zeros(model.problem.n_cols)
    for i, w in enumerate(weights):
        cost += w * model.objective_selector(i)
    out = solve(model.problem.with_objective(cost), solver_tol)
    plan = None
    if out.x is not None:
        plan = model.describe_solution(out.x, None, "weighted")
    return out, plan
