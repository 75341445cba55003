import numpy as np
import pytest

from oracles import nondominated_by_pairs
from sdoplan.epsilon import dominates
from sdoplan.errors import InsufficientSample, NoQualifyingSolutions
from sdoplan.forest import ForestHyper
from sdoplan.model import build_molp
from sdoplan.simplex import solve
from sdoplan.twophase import (CriteriaRecord, TwoPhaseConfig, nd_filter,
                              phase2_ranges, run_ml, run_regular,
                              solve_weighted)


def record(cov, pci, bot, objectives=None, phase="phase1"):
    if objectives is None:
        objectives = np.array([0.0, 10.0, 0.0, 1.0, bot])
    return CriteriaRecord(eps=None, cov=cov, pci=pci, bot=bot,
                          objectives=np.asarray(objectives, float),
                          phase=phase)


# --- Phase-II range selection -------------------------------------------------


def test_quartile_cut_linear_interpolation():
    records = [record(0.99, 0.9, b) for b in (10.0, 20.0, 30.0, 40.0)]
    config = TwoPhaseConfig()
    ranges, bot_max = phase2_ranges(records, config)
    assert bot_max == pytest.approx(17.5)
    # only the BOT=10 record passes the cut, so ranges collapse onto it
    assert ranges.lower[4] == ranges.upper[4] == pytest.approx(10.0)


def test_single_qualifying_record_collapses_ranges():
    records = [record(0.99, 0.9, 25.0,
                      objectives=[1.0, 500.0, 0.0, 2.0, 25.0]),
               record(0.50, 0.4, 10.0)]
    ranges, _ = phase2_ranges(records, TwoPhaseConfig())
    assert np.array_equal(ranges.lower, ranges.upper)
    assert ranges.lower[1] == 500.0


def test_impossible_threshold_raises():
    records = [record(0.99, 0.9, 10.0)]
    with pytest.raises(NoQualifyingSolutions):
        phase2_ranges(records, TwoPhaseConfig(cov_min=1.0, pci_min=1.0))
    # cov can never exceed 1, so a threshold above 1 rejects everything
    cfg = TwoPhaseConfig(cov_min=0.98, pci_min=0.9)
    with pytest.raises(NoQualifyingSolutions):
        phase2_ranges([record(0.97, 0.99, 5.0)], cfg)


def test_phase2_ranges_span_selected_records():
    records = [record(0.99, 0.9, 10.0,
                      objectives=[0.0, 100.0, 0.0, 1.0, 10.0]),
               record(0.99, 0.8, 11.0,
                      objectives=[2.0, 300.0, 0.0, 3.0, 11.0]),
               record(0.99, 0.9, 100.0,
                      objectives=[9.0, 900.0, 0.0, 9.0, 100.0])]
    ranges, bot_max = phase2_ranges(records, TwoPhaseConfig())
    assert bot_max == pytest.approx(10.5)  # Q1 of {10, 11, 100}
    # records with BOT at most the quartile survive: the first one only
    assert ranges.lower[1] == ranges.upper[1] == 100.0
    assert ranges.upper[4] == 10.0


# --- ND filter ------------------------------------------------------------------


def test_nd_filter_spec_pair():
    a = record(0.99, 0.90, 50.0)
    b = record(0.98, 0.85, 60.0)
    assert nd_filter([a, b]) == [a]


def test_nd_filter_identical_records_all_kept():
    records = [record(0.9, 0.8, 30.0) for _ in range(4)]
    assert nd_filter(records) == records


def test_nd_filter_matches_pairwise_oracle():
    rng = np.random.default_rng(42)
    records = [record(float(c), float(p), float(b))
               for c, p, b in zip(rng.uniform(0.5, 1.0, 200),
                                  rng.uniform(0.3, 1.0, 200),
                                  rng.uniform(5.0, 120.0, 200))]
    kept = nd_filter(records)
    triples = [(r.cov, r.pci, r.bot) for r in records]
    expected = [records[i] for i in nondominated_by_pairs(triples)]
    assert kept == expected


# --- full runs on the small preset ------------------------------------------------


@pytest.fixture(scope="module")
def small_runs(small_instance):
    config = TwoPhaseConfig(seed=1, forest=ForestHyper(n_trees=40))
    regular = run_regular(small_instance, config)
    from dataclasses import replace
    ml = run_ml(small_instance, replace(config, mode="ml"))
    return regular, ml


def test_regular_archive_nondominated(small_runs):
    (archive, report), _ = small_runs
    M = archive.objective_matrix()
    for i in range(len(M)):
        for j in range(len(M)):
            if i != j:
                assert not dominates(M[i], M[j])
    assert report.pruned == 0


def test_regular_phase_accounting(small_runs):
    (_, report), _ = small_runs
    for phase in report.phases:
        s = phase.stats
        assert (s.n_sol + s.n_infeasible_solved + s.n_omitted_infeasible
                + s.n_omitted_repeat) == s.n_eps


def test_regular_phase2_focuses(small_runs):
    (_, report), _ = small_runs
    by_name = {p.name: p.stats for p in report.phases}
    assert "phase2" in by_name
    assert by_name["phase2"].pct_infeas <= by_name["phase1"].pct_infeas


def test_run_is_deterministic(small_instance):
    config = TwoPhaseConfig(seed=5, forest=ForestHyper(n_trees=10))
    a_archive, a_report = run_regular(small_instance, config)
    b_archive, b_report = run_regular(small_instance, config)
    assert len(a_archive) == len(b_archive)
    for ea, eb in zip(a_archive.entries, b_archive.entries):
        assert np.array_equal(ea.objectives, eb.objectives)
    assert a_report.eps_lp_solves == b_report.eps_lp_solves


def test_ml_solves_fewer_lps(small_runs):
    (_, rep_r), (_, rep_m) = small_runs
    assert rep_m.eps_lp_solves < rep_r.eps_lp_solves


def test_ml_archive_nondominated_and_tagged(small_runs):
    _, (archive, report) = small_runs
    M = archive.objective_matrix()
    for i in range(len(M)):
        for j in range(len(M)):
            if i != j:
                assert not dominates(M[i], M[j])
    tags = {e.phase for e in archive.entries}
    assert "phase1" in tags
    assert report.prediction is not None
    assert report.prediction["n_predicted"] >= 0


def test_ml_every_plan_satisfies_coverage_budget(small_runs, small_instance):
    # recomputed criteria must respect the coverage-implied inequalities
    _, (archive, _) = small_runs
    from sdoplan.model import dose_of_plan
    for entry in archive.entries:
        dose = dose_of_plan(small_instance, entry.plan.durations)
        for t in small_instance.tumors:
            sl = small_instance.slice_of(t.name)
            D = small_instance.prescriptions[t.name]
            under = np.maximum(D - dose[sl], 0.0).sum()
            cov = entry.plan.criteria.cov_by_tumor[t.name]
            assert under <= D * t.n_voxels * (1.0 - cov) + 1e-6


def test_ml_rho_one_matches_regular_phase1(small_instance):
    from dataclasses import replace
    config = TwoPhaseConfig(seed=3, forest=ForestHyper(n_trees=10))
    arch_r, _ = run_regular(small_instance, config)
    arch_m, rep_m = run_ml(small_instance,
                           replace(config, mode="ml", rho=1.0))
    reg_phase1 = {tuple(np.round(e.objectives, 6))
                  for e in arch_r.entries if e.phase == "phase1"}
    ml_phase1 = {tuple(np.round(e.objectives, 6))
                 for e in arch_m.entries if e.phase == "phase1"}
    assert ml_phase1 == reg_phase1
    names = [p.name for p in rep_m.phases]
    assert "phase1_ml" not in names  # nothing left to predict over


def test_ml_insufficient_sample_raises(small_instance):
    with pytest.raises(InsufficientSample):
        run_ml(small_instance,
               TwoPhaseConfig(seed=0, mode="ml", rho=0.001))


def test_ml_with_oracle_predictor_covers_regular(small_instance,
                                                 monkeypatch):
    """With an always-optimistic predictor, the prediction-guided run
    must recover at least the regular run's qualifying Phase-II plans."""
    import sdoplan.twophase as tp

    class _Always:
        def __init__(self, value):
            self.value = value

        def predict(self, X):
            return np.full(len(X), self.value)

    def oracle_predictors(labeled, config, stage):
        return {"feas": _Always(1), "cov": _Always(1.0),
                "pci": _Always(1.0), "bot": _Always(0.0)}

    monkeypatch.setattr(tp, "_train_predictors", oracle_predictors)
    config = TwoPhaseConfig(seed=2, forest=ForestHyper(n_trees=5))
    arch_r, _ = run_regular(small_instance, config)
    from dataclasses import replace
    arch_m, _ = run_ml(small_instance, replace(config, mode="ml"))
    ml_set = [e.objectives for e in arch_m.entries]
    cov_min, pci_min = config.cov_min, config.pci_min
    missing = 0
    for e in arch_r.entries:
        crit = e.plan.criteria
        if e.phase == "phase2" and crit.cov >= cov_min \
                and crit.pci >= pci_min:
            if not any(np.all(np.abs(e.objectives - v) <= 1e-6)
                       for v in ml_set):
                missing += 1
    assert missing == 0


def test_report_json_round_trip(small_runs):
    import json
    (_, rep_r), (_, rep_m) = small_runs
    for rep in (rep_r, rep_m):
        doc = json.loads(json.dumps(rep.to_json()))
        assert doc["mode"] in ("regular", "ml")
        assert len(doc["payoff"]) == 5
        assert all(len(row) == 5 for row in doc["payoff"])
        assert doc["eps_lp_solves"] > 0
        assert doc["thresholds"]["cov_min"] == 0.98


# --- weighted-sum single solve ------------------------------------------------------


def test_weighted_single_objective_matches_standalone(small_instance):
    model = build_molp(small_instance, cov_min=0.98)
    out, plan = solve_weighted(model, [0, 0, 0, 1, 0])
    ref = solve(model.problem.with_objective(model.objective_selector(3)))
    assert out.value == pytest.approx(ref.value, abs=1e-6)
    assert plan.objectives.tumor_underdose == pytest.approx(ref.value,
                                                            abs=1e-4)


def test_weighted_rejects_bad_weights(small_instance):
    model = build_molp(small_instance, cov_min=0.98)
    with pytest.raises(ValueError):
        solve_weighted(model, [0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        solve_weighted(model, [1, -1, 0, 0, 0])
    with pytest.raises(ValueError):
        solve_weighted(model, [1, 1])


def test_config_validation():
    with pytest.raises(ValueError):
        TwoPhaseConfig(cov_min=0.0)
    with pytest.raises(ValueError):
        TwoPhaseConfig(rho=0.0)
    with pytest.raises(ValueError):
        TwoPhaseConfig(mode="other")
    with pytest.raises(ValueError):
        TwoPhaseConfig(primary=7)
