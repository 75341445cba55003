import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from oracles import (coverage_by_counting, dose_triple_loop, dvh_by_counting,
                     pci_by_counting)
from sdoplan.errors import ShapeMismatch, UnknownStructure
from sdoplan.lp import LpStatus
from sdoplan.model import (build_molp, criteria_of_plan, dose_of_plan, dvh,
                           objectives_of_plan)
from sdoplan.simplex import solve


def test_variable_count_micro(micro_instance):
    model = build_molp(micro_instance, cov_min=0.98)
    # g(1*8*3) + d(3) + u(1) + o(2) + b(1) + h(5)
    assert model.problem.n_cols == 24 + 3 + 1 + 2 + 1 + 5 == 36


def test_row_count_formula(micro_instance):
    model = build_molp(micro_instance, cov_min=0.98)
    V, Vt, Vr, Vc, I, S = 3, 1, 1, 1, 1, 8
    assert model.problem.n_rows == V + 2 * Vt + Vr + Vc + I * S + 5 + 1


def test_full_coverage_budget_is_zero(micro_instance):
    model = build_molp(micro_instance, cov_min=1.0)
    assert model.problem.rhs[-1] == 0.0


def test_budget_rhs_case3_numbers():
    # 1347 tumor voxels at 12.5 Gy and 98% required coverage
    rng = np.random.default_rng(0)
    tumor = rng.choice(40 ** 3, size=1347, replace=False)
    tumor_vox = np.stack(np.unravel_index(tumor, (40, 40, 40)), axis=1)
    inst = make_instance(tumor_vox=tumor_vox, ring_vox=[[41, 0, 0]],
                         prescription=12.5)
    model = build_molp(inst, cov_min=0.98)
    assert model.problem.rhs[-1] == pytest.approx(336.75, rel=1e-12)


def test_zero_durations_zero_dose(small_instance):
    dose = dose_of_plan(small_instance,
                        np.zeros(small_instance.durations_shape()))
    assert np.all(dose == 0.0)


def test_single_beam_linearity(small_instance):
    g = np.zeros(small_instance.durations_shape())
    g[1, 3, 2] = 2.0
    dose = dose_of_plan(small_instance, g)
    assert np.allclose(dose, 2.0 * small_instance.dose_rate[:, 1, 3, 2],
                       rtol=1e-12)


def test_dose_matches_triple_loop(small_instance):
    rng = np.random.default_rng(5)
    g = rng.uniform(0, 3, small_instance.durations_shape())
    fast = dose_of_plan(small_instance, g)
    slow = dose_triple_loop(small_instance, g)
    assert np.allclose(fast, slow, rtol=1e-9, atol=1e-12)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
@settings(max_examples=15, deadline=None)
def test_dose_linearity_property(seed, a, b):
    inst = make_instance(tumor_vox=[[0, 0, 0], [1, 0, 0]],
                         ring_vox=[[2, 0, 0]])
    rng = np.random.default_rng(seed)
    g1 = rng.uniform(0, 2, inst.durations_shape())
    g2 = rng.uniform(0, 2, inst.durations_shape())
    lhs = dose_of_plan(inst, a * g1 + b * g2)
    rhs = a * dose_of_plan(inst, g1) + b * dose_of_plan(inst, g2)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


def test_zero_plan_objectives(small_instance):
    obj = objectives_of_plan(small_instance,
                             np.zeros(small_instance.durations_shape()))
    expected_h4 = sum(small_instance.prescriptions[t.name] * t.n_voxels
                      for t in small_instance.tumors)
    assert obj.ring_overdose == 0.0
    assert obj.healthy_dose == 0.0
    assert obj.tumor_overdose == 0.0
    assert obj.bot == 0.0
    assert obj.tumor_underdose == pytest.approx(expected_h4)


def test_bot_is_max_over_sectors(micro_instance):
    g = np.zeros(micro_instance.durations_shape())
    g[0, 0] = [1.0, 1.0, 0.0]   # sector sums: 2
    g[0, 1] = [1.0, 1.0, 1.0]   # 3
    g[0, 2] = [0.5, 0.25, 0.25] # 1
    obj = objectives_of_plan(micro_instance, g)
    assert obj.bot == pytest.approx(3.0)


def test_objectives_match_lp_auxiliaries(small_instance):
    # pin the durations inside the LP and let it pick the auxiliaries;
    # a near-zero coverage floor keeps arbitrary plans feasible
    rng = np.random.default_rng(9)
    model = build_molp(small_instance, cov_min=1e-6)
    g = rng.uniform(0, 0.4, small_instance.durations_shape())
    prob = model.problem.copy()
    prob.lower[model.g_cols] = g.ravel()
    prob.upper[model.g_cols] = g.ravel()
    cost = np.zeros(prob.n_cols)
    cost[model.h_cols] = 1.0
    out = solve(prob.with_objective(cost))
    assert out.status is LpStatus.OPTIMAL
    closed = objectives_of_plan(small_instance, g).as_array()
    assert np.allclose(out.x[model.h_cols], closed, atol=1e-6)


def test_criteria_uniform_tumor_only_dose():
    # rate 1 on tumor voxels only: pci == cov == 1 once covered
    tumor = [[0, 0, 0], [1, 0, 0]]
    ring = [[2, 0, 0], [3, 0, 0]]
    rate = np.zeros((4, 1, 8, 3))
    rate[:2, 0, 0, 0] = 1.0
    inst = make_instance(tumor_vox=tumor, ring_vox=ring, dose_rate=rate,
                         prescription=10.0)
    g = np.zeros(inst.durations_shape())
    g[0, 0, 0] = 10.0
    crit = criteria_of_plan(inst, g)
    assert crit.cov == 1.0
    assert crit.pci == 1.0


def test_pci_formula_counts():
    # TV=100 with 98 covered; PIV=120 (98 tumor + 22 ring)
    tumor = [[i, 0, 0] for i in range(100)]
    ring = [[i, 1, 0] for i in range(22)]
    rate = np.zeros((122, 1, 8, 3))
    rate[:98, 0, 0, 0] = 1.0
    rate[98:100, 0, 0, 0] = 0.5
    rate[100:, 0, 0, 0] = 1.0
    inst = make_instance(tumor_vox=tumor, ring_vox=ring, dose_rate=rate,
                         prescription=10.0, ring_max=20.0)
    g = np.zeros(inst.durations_shape())
    g[0, 0, 0] = 10.0
    crit = criteria_of_plan(inst, g)
    assert crit.cov == pytest.approx(0.98)
    assert crit.pci == pytest.approx(98 ** 2 / (100 * 120))
    assert crit.pci == pytest.approx(0.80033, abs=5e-6)


def test_zero_plan_criteria(small_instance):
    crit = criteria_of_plan(small_instance,
                            np.zeros(small_instance.durations_shape()))
    assert crit.cov == 0.0
    assert crit.pci == 0.0
    assert crit.bot_min == 0.0


def test_pci_bounded_by_cov(small_instance):
    rng = np.random.default_rng(31)
    for _ in range(10):
        g = rng.uniform(0, 2, small_instance.durations_shape())
        crit = criteria_of_plan(small_instance, g)
        assert crit.pci <= crit.cov + 1e-12


def test_criteria_match_counting_oracles(small_instance):
    rng = np.random.default_rng(77)
    for _ in range(5):
        g = rng.uniform(0, 2, small_instance.durations_shape())
        dose = dose_of_plan(small_instance, g)
        crit = criteria_of_plan(small_instance, g)
        ref_cov = coverage_by_counting(small_instance, dose)
        assert crit.cov_by_tumor == ref_cov
        assert crit.pci == pytest.approx(
            pci_by_counting(small_instance, dose), abs=1e-12)


def test_dvh_zero_plan(small_instance):
    z = np.zeros(small_instance.durations_shape())
    curve = dvh(small_instance, z, "tumor", [0.0, 1.0, 5.0])
    assert curve[0] == (0.0, 1.0)
    assert curve[1][1] == 0.0 and curve[2][1] == 0.0


def test_dvh_uniform_step():
    tumor = [[0, 0, 0], [1, 0, 0]]
    ring = [[2, 0, 0]]
    rate = np.zeros((3, 1, 8, 3))
    rate[:, 0, 0, 0] = 1.0
    inst = make_instance(tumor_vox=tumor, ring_vox=ring, dose_rate=rate)
    g = np.zeros(inst.durations_shape())
    g[0, 0, 0] = 5.0
    curve = dict(dvh(inst, g, "tumor", [0.0, 2.5, 5.0, 7.5]))
    assert curve[0.0] == 1.0 and curve[2.5] == 1.0
    assert curve[5.0] == 1.0 and curve[7.5] == 0.0


def test_dvh_matches_counting_oracle(small_instance):
    rng = np.random.default_rng(13)
    g = rng.uniform(0, 2, small_instance.durations_shape())
    grid = np.linspace(0.0, 25.0, 11)
    dose = dose_of_plan(small_instance, g)
    for name in ("tumor", "ring", "oar1"):
        got = [f for _, f in dvh(small_instance, g, name, grid)]
        ref = dvh_by_counting(small_instance, dose, name, grid)
        assert got == ref


def test_dvh_monotone_nonincreasing(small_instance):
    rng = np.random.default_rng(14)
    g = rng.uniform(0, 2, small_instance.durations_shape())
    frac = [f for _, f in dvh(small_instance, g, "ring",
                              np.linspace(0, 30, 40))]
    assert np.all(np.diff(frac) <= 0)


def test_shape_and_name_errors(small_instance):
    with pytest.raises(ShapeMismatch):
        dose_of_plan(small_instance, np.zeros((1, 8, 3)))
    with pytest.raises(UnknownStructure):
        dvh(small_instance, np.zeros(small_instance.durations_shape()),
            "nope", [0.0, 1.0])
    with pytest.raises(ValueError):
        dvh(small_instance, np.zeros(small_instance.durations_shape()),
            "tumor", [1.0, 1.0])


def test_cov_min_validation(micro_instance):
    with pytest.raises(ValueError):
        build_molp(micro_instance, cov_min=0.0)
    with pytest.raises(ValueError):
        build_molp(micro_instance, cov_min=1.2)
