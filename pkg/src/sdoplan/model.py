"""Five-objective dose LP assembly and clinical plan metrics.

The LP minimizes (selectively) five totals: ring overdose, dose to
OARs+rings, tumor overdose, tumor underdose, and beam-on time.  Columns
are ordered [g | d | u | o | b | h]; rows are ordered [dose definitions |
tumor underdose links | tumor overdose links | ring overdose links |
OAR caps | per-(isocenter, sector) BOT | five objective definitions |
per-tumor underdose budget rows].  The budget rows encode a minimum
coverage requirement: the total underdose a tumor may accumulate is what
its uncovered fraction could absorb at full prescription.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeMismatch, UnknownStructure
from .lp import REL_EQ, REL_GE, REL_LE, LpProblem
from .phantom import SdoInstance

N_OBJECTIVES = 5
COVERAGE_TOL = 1e-9  # dose >= prescription - this counts as covered


@dataclass(frozen=True)
class ObjectiveVector:
    ring_overdose: float      # h1, Gy-voxel
    healthy_dose: float       # h2, Gy-voxel over OARs + rings
    tumor_overdose: float     # h3, Gy-voxel
    tumor_underdose: float    # h4, Gy-voxel
    bot: float                # h5, minutes

    def as_array(self):
        return np.array([self.ring_overdose, self.healthy_dose,
                         self.tumor_overdose, self.tumor_underdose,
                         self.bot])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class PerformanceCriteria:
    cov_by_tumor: dict
    cov: float
    pci: float
    bot_min: float
    max_oar_dose: dict


@dataclass(frozen=True)
class PlanSolution:
    durations: np.ndarray          # (I, S, K) minutes
    iso_bot: np.ndarray            # (I,) minutes
    objectives: ObjectiveVector
    criteria: PerformanceCriteria
    slacks: dict                   # bounded objective index -> y_i
    phase_tag: str


@dataclass(frozen=True)
class MolpModel:
    instance: SdoInstance
    problem: LpProblem             # all-zero objective; selectors pick h_i
    h_cols: np.ndarray             # column indices of h1..h5
    g_cols: slice
    d_cols: slice
    u_cols: slice
    o_cols: slice
    b_cols: slice
    cov_min: float
    row_counts: dict = field(default_factory=dict)

    @property
    def n_objectives(self):
        return N_OBJECTIVES

    def objective_selector(self, i):
        """Cost vector that minimizes objective i (0-based)."""
        c = np.zeros(self.problem.n_cols)
        c[self.h_cols[i]] = 1.0
        return c

    def durations_from(self, x):
        shape = self.instance.durations_shape()
        return x[self.g_cols].reshape(shape).copy()

    def objective_values(self, x):
        """Objective vector recomputed from the raw durations."""
        g = self.durations_from(x)
        return objectives_of_plan(self.instance, g).as_array()

    def describe_solution(self, x, eps, phase_tag) -> "PlanSolution":
        g = self.durations_from(x)
        return PlanSolution(
            durations=g,
            iso_bot=iso_bot_of_plan(self.instance, g),
            objectives=objectives_of_plan(self.instance, g),
            criteria=criteria_of_plan(self.instance, g),
            slacks={},
            phase_tag=phase_tag)


def build_molp(instance: SdoInstance, cov_min: float) -> MolpModel:
    """Assemble the dose LP plus per-tumor underdose budget rows."""
    if not 0.0 < cov_min <= 1.0:
        raise ValueError("cov_min must be in (0, 1]")
    inst = instance
    I, S, K = inst.durations_shape()
    nG = I * S * K
    V = inst.total_voxels

    tumors = inst.tumors
    rings = inst.rings
    oars = inst.oars
    Vt = sum(s.n_voxels for s in tumors)
    Vr = sum(s.n_voxels for s in rings)
    Vc = sum(s.n_voxels for s in oars)

    g0 = 0
    d0 = g0 + nG
    u0 = d0 + V
    o0 = u0 + Vt
    b0 = o0 + Vt + Vr
    h0 = b0 + I
    n_cols = h0 + N_OBJECTIVES

    # global voxel row ranges per structure, in declaration order
    voxel_slice = {s.name: inst.slice_of(s.name) for s in inst.structures}
    # u columns follow tumor declaration order; o columns tumors then rings
    u_col = {}
    off = u0
    for s in tumors:
        u_col[s.name] = off
        off += s.n_voxels
    o_col = {}
    off = o0
    for s in (*tumors, *rings):
        o_col[s.name] = off
        off += s.n_voxels

    rows_i, cols_i, vals = [], [], []
    relations, rhs = [], []
    row = 0

    def put(r, c, v):
        rows_i.append(r)
        cols_i.append(c)
        vals.append(v)

    # dose definitions: d_v - sum_g G[v, g] g = 0
    G2 = inst.dose_rate.reshape(V, nG)
    rr = np.repeat(np.arange(V), nG)
    cc = np.tile(np.arange(nG), V)
    rows_i.append(rr)
    cols_i.append(cc)
    vals.append(-G2.ravel())
    rows_i.append(np.arange(V))
    cols_i.append(d0 + np.arange(V))
    vals.append(np.ones(V))
    relations.extend([REL_EQ] * V)
    rhs.extend([0.0] * V)
    row += V

    # tumor underdose links: d + u >= D_t
    for s in tumors:
        sl = voxel_slice[s.name]
        n = s.n_voxels
        r = row + np.arange(n)
        rows_i += [r, r]
        cols_i += [d0 + np.arange(sl.start, sl.stop), u_col[s.name] + np.arange(n)]
        vals += [np.ones(n), np.ones(n)]
        relations.extend([REL_GE] * n)
        rhs.extend([inst.prescriptions[s.name]] * n)
        row += n
    # tumor overdose links: d - o <= Dmax
    for s in tumors:
        sl = voxel_slice[s.name]
        n = s.n_voxels
        r = row + np.arange(n)
        rows_i += [r, r]
        cols_i += [d0 + np.arange(sl.start, sl.stop), o_col[s.name] + np.arange(n)]
        vals += [np.ones(n), -np.ones(n)]
        relations.extend([REL_LE] * n)
        rhs.extend([s.max_dose_Gy] * n)
        row += n
    # ring overdose links: d - o <= Dmax
    for s in rings:
        sl = voxel_slice[s.name]
        n = s.n_voxels
        r = row + np.arange(n)
        rows_i += [r, r]
        cols_i += [d0 + np.arange(sl.start, sl.stop), o_col[s.name] + np.arange(n)]
        vals += [np.ones(n), -np.ones(n)]
        relations.extend([REL_LE] * n)
        rhs.extend([s.max_dose_Gy] * n)
        row += n
    # OAR hard caps: d <= Dmax (no overdose variables for OARs)
    for s in oars:
        sl = voxel_slice[s.name]
        n = s.n_voxels
        rows_i.append(row + np.arange(n))
        cols_i.append(d0 + np.arange(sl.start, sl.stop))
        vals.append(np.ones(n))
        relations.extend([REL_LE] * n)
        rhs.extend([s.max_dose_Gy] * n)
        row += n
    # BOT: b_theta >= sum_k g_{theta,s,k} for every sector
    for t in range(I):
        for s in range(S):
            base = (t * S + s) * K
            put(row, b0 + t, 1.0)
            for k in range(K):
                put(row, g0 + base + k, -1.0)
            relations.append(REL_GE)
            rhs.append(0.0)
            row += 1
    # objective definitions
    h = h0 + np.arange(N_OBJECTIVES)
    put(row, h[0], 1.0)  # h1 = ring overdose total
    for s in rings:
        n = s.n_voxels
        rows_i.append(np.full(n, row))
        cols_i.append(o_col[s.name] + np.arange(n))
        vals.append(-np.ones(n))
    relations.append(REL_EQ)
    rhs.append(0.0)
    row += 1
    put(row, h[1], 1.0)  # h2 = dose to OARs + rings
    for s in (*oars, *rings):
        sl = voxel_slice[s.name]
        n = s.n_voxels
        rows_i.append(np.full(n, row))
        cols_i.append(d0 + np.arange(sl.start, sl.stop))
        vals.append(-np.ones(n))
    relations.append(REL_EQ)
    rhs.append(0.0)
    row += 1
    put(row, h[2], 1.0)  # h3 = tumor overdose total
    for s in tumors:
        n = s.n_voxels
        rows_i.append(np.full(n, row))
        cols_i.append(o_col[s.name] + np.arange(n))
        vals.append(-np.ones(n))
    relations.append(REL_EQ)
    rhs.append(0.0)
    row += 1
    put(row, h[3], 1.0)  # h4 = tumor underdose total
    for s in tumors:
        n = s.n_voxels
        rows_i.append(np.full(n, row))
        cols_i.append(u_col[s.name] + np.arange(n))
        vals.append(-np.ones(n))
    relations.append(REL_EQ)
    rhs.append(0.0)
    row += 1
    put(row, h[4], 1.0)  # h5 = total beam-on time
    rows_i.append(np.full(I, row))
    cols_i.append(b0 + np.arange(I))
    vals.append(-np.ones(I))
    relations.append(REL_EQ)
    rhs.append(0.0)
    row += 1
    # per-tumor underdose budgets at the required coverage
    for s in tumors:
        n = s.n_voxels
        rows_i.append(np.full(n, row))
        cols_i.append(u_col[s.name] + np.arange(n))
        vals.append(np.ones(n))
        relations.append(REL_LE)
        rhs.append(inst.prescriptions[s.name] * n * (1.0 - cov_min))
        row += 1

    rows_arr = np.concatenate([np.atleast_1d(np.asarray(a)) for a in rows_i])
    cols_arr = np.concatenate([np.atleast_1d(np.asarray(a)) for a in cols_i])
    vals_arr = np.concatenate([np.atleast_1d(np.asarray(a, dtype=float))
                               for a in vals])
    A = sp.coo_matrix((vals_arr, (rows_arr, cols_arr)),
                      shape=(row, n_cols)).tocsr()
    problem = LpProblem(c=np.zeros(n_cols), A=A, relations=relations, rhs=rhs)
    counts = {"dose": V, "tumor_under": Vt, "tumor_over": Vt,
              "ring_over": Vr, "oar_cap": Vc, "bot": I * S,
              "objective": N_OBJECTIVES, "budget": len(tumors)}
    return MolpModel(instance=inst, problem=problem, h_cols=h,
                     g_cols=slice(g0, g0 + nG), d_cols=slice(d0, d0 + V),
                     u_cols=slice(u0, u0 + Vt),
                     o_cols=slice(o0, o0 + Vt + Vr),
                     b_cols=slice(b0, b0 + I), cov_min=cov_min,
                     row_counts=counts)


# --- plan evaluation -------------------------------------------------------


def _check_durations(instance, durations):
    durations = np.asarray(durations, dtype=float)
    if durations.shape != instance.durations_shape():
        raise ShapeMismatch(
            f"durations: expected {instance.durations_shape()}, "
            f"got {durations.shape}")
    return durations


def dose_of_plan(instance: SdoInstance, durations) -> np.ndarray:
    """Per-voxel dose, aligned with the instance's global voxel order."""
    durations = _check_durations(instance, durations)
    V = instance.total_voxels
    return instance.dose_rate.reshape(V, -1) @ durations.ravel()


def iso_bot_of_plan(instance: SdoInstance, durations) -> np.ndarray:
    """Per-isocenter beam-on time: the busiest sector's total."""
    durations = _check_durations(instance, durations)
    return durations.sum(axis=2).max(axis=1)


def objectives_of_plan(instance: SdoInstance, durations) -> ObjectiveVector:
    """Objective totals via their closed forms.

    For an optimal LP plan these coincide with the auxiliary variables:
    the slack pressure drives each linked variable to its bound.
    """
    durations = _check_durations(instance, durations)
    dose = dose_of_plan(instance, durations)
    ring_over = healthy = tumor_over = tumor_under = 0.0
    for s in instance.structures:
        d = dose[instance.slice_of(s.name)]
        if s.kind == "tumor":
            D = instance.prescriptions[s.name]
            tumor_under += float(np.maximum(D - d, 0.0).sum())
            tumor_over += float(np.maximum(d - s.max_dose_Gy, 0.0).sum())
        elif s.kind == "ring":
            ring_over += float(np.maximum(d - s.max_dose_Gy, 0.0).sum())
            healthy += float(d.sum())
        else:
            healthy += float(d.sum())
    bot = float(iso_bot_of_plan(instance, durations).sum())
    return ObjectiveVector(ring_over, healthy, tumor_over, tumor_under, bot)


def criteria_of_plan(instance: SdoInstance, durations) -> PerformanceCriteria:
    """Coverage, conformity, beam-on time, and per-OAR peak dose.

    The prescription isodose volume is counted over modeled voxels only
    (tumor + ring + OARs), so the conformity index is an upper bound on
    what a whole-head voxel set would give.
    """
    durations = _check_durations(instance, durations)
    dose = dose_of_plan(instance, durations)
    cov_by = {}
    tv = 0
    tv_piv = 0
    for s in instance.tumors:
        d = dose[instance.slice_of(s.name)]
        D = instance.prescriptions[s.name]
        hit = int(np.count_nonzero(d >= D - COVERAGE_TOL))
        cov_by[s.name] = hit / s.n_voxels
        tv += s.n_voxels
        tv_piv += hit
    d_min = min(instance.prescriptions.values())
    piv = int(np.count_nonzero(dose >= d_min - COVERAGE_TOL))
    cov = tv_piv / tv
    pci = (tv_piv ** 2 / (tv * piv)) if piv else 0.0
    bot = float(iso_bot_of_plan(instance, durations).sum())
    max_oar = {s.name: float(dose[instance.slice_of(s.name)].max())
               for s in instance.oars}
    return PerformanceCriteria(cov_by_tumor=cov_by, cov=cov, pci=pci,
                               bot_min=bot, max_oar_dose=max_oar)


def dvh(instance: SdoInstance, durations, structure: str, dose_grid):
    """(dose, fraction of the structure receiving at least dose) pairs."""
    grid = np.asarray(dose_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("dose_grid must be strictly increasing")
    s = instance.structure(structure)  # raises UnknownStructure
    dose = dose_of_plan(instance, durations)[instance.slice_of(s.name)]
    frac = (dose[None, :] >= grid[:, None]).mean(axis=1)
    return list(zip(grid.tolist(), frac.tolist()))
