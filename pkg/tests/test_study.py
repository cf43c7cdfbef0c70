import csv

import numpy as np
import pytest

import crsim.study as study
from crsim.inference import ConstrainedFitError
from crsim.model import Administrative, Exponential
from crsim.study import (CENSORING_SETTINGS, SCENARIO_INTENSITIES, StudyAborted,
                         application_cohorts, application_params, builtin_scenarios,
                         get_scenario, read_results_csv, run_scenario, run_study, thresholds,
                         write_results_csv)

from conftest import cached_cell

TABLE_EPS_INF = {"adm": 0.11805, "Exp(0.002)": 0.10849, "Exp(0.005)": 0.0960, "Exp(0.01)": 0.0794}


class TestScenarios:
    def test_grid_of_scenarios(self):
        scenarios = builtin_scenarios()
        assert len(scenarios) == 28
        assert {s.name for s in scenarios} == set(SCENARIO_INTENSITIES)
        assert {s.censoring_label for s in scenarios} == set(CENSORING_SETTINGS)
        assert all(s.tau == 90.0 for s in scenarios)

    def test_thresholds_match_table(self):
        for label, (e_int, e_inf) in thresholds().items():
            assert e_int == 0.0015
            assert e_inf == pytest.approx(TABLE_EPS_INF[label], abs=5e-4)

    def test_margin_scenario_sits_on_the_margin(self):
        for label in CENSORING_SETTINGS:
            s = get_scenario("Margin", label)
            assert s.d_inf == s.eps_inf
            assert s.d_int == s.eps_int == 0.0015

    def test_null_and_alternatives_on_either_side(self):
        for s in builtin_scenarios():
            if s.name == "Null":
                assert s.d_inf > s.eps_inf and s.d_int > s.eps_int
            elif s.name.startswith("Alt"):
                assert s.d_inf < s.eps_inf and s.d_int < s.eps_int

    def test_alternatives_approach_each_other(self):
        for label in CENSORING_SETTINGS:
            d = [get_scenario(f"Alt{i}", label).d_inf for i in range(1, 6)]
            assert all(a > b for a, b in zip(d, d[1:]))

    def test_test_censoring_hides_rate(self):
        assert get_scenario("Alt1", "Exp(0.005)").test_censoring() == Exponential()
        assert get_scenario("Alt1", "adm").test_censoring() == Administrative(90)

    def test_unknown_scenario(self):
        with pytest.raises(KeyError):
            get_scenario("Alt9", "adm")

    def test_application_shape(self):
        c1, c2 = application_cohorts(0)
        assert (len(c1), len(c2)) == (213, 482)
        assert c1.k == c2.k == 3
        assert c1.times.max() <= 90 and c2.times.max() <= 90
        # intensities reproduce the event shares by day 90 exactly
        from crsim.model import transition_probabilities
        p = transition_probabilities(application_params(2).intensities, 90.0)
        np.testing.assert_allclose(p * 482, [29, 60, 31], rtol=1e-12)


class TestRunScenario:
    def test_single_replicate_reproducible(self):
        s = get_scenario("Alt3", "adm")
        a = run_scenario(s, 100, 100, n_sim=1, B=100, seed=5)
        b = run_scenario(s, 100, 100, n_sim=1, B=100, seed=5)
        assert a.rejection_rate in (0.0, 1.0)
        assert a.row() == b.row()

    def test_rate_definition(self):
        r = run_scenario(get_scenario("Alt2", "Exp(0.005)"), 100, 100, n_sim=7, B=100, seed=1)
        assert r.rejection_rate == r.rejections / r.n_sim
        assert r.sample_sizes == (100, 100) and r.wall_time > 0

    def test_process_workers_do_not_change_result(self):
        s = get_scenario("Alt1", "Exp(0.002)")
        one = run_scenario(s, 80, 80, n_sim=12, B=100, seed=2)
        two = run_scenario(s, 80, 80, n_sim=12, B=100, seed=2, workers=2)
        assert one.row() == two.row()

    def test_measures_share_data(self, monkeypatch):
        seen = {}
        real = study.run_similarity_test

        def spy(c1, c2, cens1, cens2, cfg):
            seen.setdefault(cfg.measure, []).append((c1.times.sum(), c2.times.sum()))
            return real(c1, c2, cens1, cens2, cfg)

        monkeypatch.setattr(study, "run_similarity_test", spy)
        s = get_scenario("Alt2", "adm")
        for m in ("prob", "int"):
            run_scenario(s, 60, 60, n_sim=3, B=100, measure=m, seed=4)
        assert seen["prob"] == seen["int"]

    def test_failures_recorded_then_abort(self, monkeypatch):
        real = study.run_similarity_test
        calls = {"n": 0}

        def flaky(*args):
            calls["n"] += 1
            if calls["n"] == 2:
                raise ConstrainedFitError("synthetic")
            return real(*args)

        monkeypatch.setattr(study, "run_similarity_test", flaky)
        s = get_scenario("Alt3", "adm")
        r = run_scenario(s, 50, 50, n_sim=120, B=100, seed=0)
        assert r.failures == (1,)

        calls["n"] = 0
        with pytest.raises(StudyAborted):
            run_scenario(s, 50, 50, n_sim=50, B=100, seed=0)

    def test_csv_round_trip(self, tmp_path):
        s = get_scenario("Alt4", "Exp(0.01)")
        results = run_study([s], [(50, 50)], n_sim=3, B=100, seed=3)
        path = tmp_path / "out.csv"
        write_results_csv(results, path)
        with open(path) as fh:
            assert next(csv.reader(fh)) == study.RESULT_FIELDS
        rows = read_results_csv(path)
        assert [r["measure"] for r in rows] == ["prob", "int"]
        assert rows[0]["rate"] == results[0].rejection_rate


SLACK = 0.03


class TestStudyProperties:
    """Desk-scale (300 runs, B = 300) orderings at (200, 200)."""

    @pytest.mark.parametrize("label", list(CENSORING_SETTINGS))
    def test_power_increases_along_alternatives(self, label):
        rates = [cached_cell(f"Alt{i}", label).rejection_rate for i in (1, 2, 3)]
        assert all(a <= b + SLACK for a, b in zip(rates, rates[1:]))

    def test_power_increases_up_to_alt5(self):
        rates = [cached_cell(f"Alt{i}", "adm").rejection_rate for i in range(1, 6)]
        assert all(a <= b + SLACK for a, b in zip(rates, rates[1:]))

    @pytest.mark.parametrize("name", ["Alt1", "Alt2", "Alt3"])
    def test_more_censoring_less_power(self, name):
        rates = [cached_cell(name, c).rejection_rate for c in ("Exp(0.002)", "Exp(0.005)", "Exp(0.01)")]
        assert all(a + SLACK >= b for a, b in zip(rates, rates[1:]))
