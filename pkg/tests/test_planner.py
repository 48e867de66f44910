import math

import numpy as np
import pytest

from camcurves import (
    InfeasiblePlanError,
    InputError,
    PlanQuery,
    betagam,
    gam_required_sample_size,
    plan_report,
    required_sample_size,
    table1_presets,
)
from camcurves.betagam import ModelSpec, SmoothTerm
from camcurves.curves import predict_metric

from conftest import observation_rows


class TestLogCurveInversion:
    def test_accuracy_target(self):
        result = required_sample_size(table1_presets()["ACC"], PlanQuery("ACC", 0.95))
        assert result.required_n == 149
        assert result.predicted_value >= 0.95
        assert not result.extrapolated

    def test_fpr_target(self):
        result = required_sample_size(table1_presets()["FPR"], PlanQuery("FPR", 0.02))
        assert result.required_n == 1097
        assert result.predicted_value <= 0.02
        assert result.extrapolated  # beyond the 10..1000 ladder the curve was built on

    def test_target_already_met_at_one(self):
        result = required_sample_size(table1_presets()["ACC"], PlanQuery("ACC", 0.80))
        assert result.required_n == 1

    def test_wrong_slope_direction_unattainable(self):
        from camcurves import LearningCurveModel

        falling = LearningCurveModel(
            metric="ACC", intercept=0.6, slope=-0.01, transform="log_n",
            adj_r_squared=0.5, n_obs=6,
        )
        result = required_sample_size(falling, PlanQuery("ACC", 0.9))
        assert result.required_n is None

    def test_unreachable_within_ceiling(self):
        query = PlanQuery("ACC", 0.999, search_ceiling=1000)
        result = required_sample_size(table1_presets()["ACC"], query)
        assert result.required_n is None

    def test_target_outside_unit_interval_rejected(self):
        with pytest.raises(InputError):
            PlanQuery("ACC", 1.5)

    def test_direction_consistency_enforced(self):
        with pytest.raises(InputError):
            PlanQuery("ACC", 0.9, direction="at_most")

    def test_threshold_is_sharp_for_monotone_curves(self):
        model = table1_presets()["ACC"]
        for target in (0.90, 0.93, 0.95, 0.97):
            result = required_sample_size(model, PlanQuery("ACC", target))
            n = result.required_n
            assert predict_metric(model, n) >= target
            if n > 1:
                assert predict_metric(model, n - 1) < target

    def test_raising_target_never_lowers_required_n(self):
        model = table1_presets()["ACC"]
        previous = 0
        for target in np.linspace(0.86, 0.98, 25):
            n = required_sample_size(model, PlanQuery("ACC", float(target))).required_n
            assert n >= previous
            previous = n


def _fit_single_smooth(values, sizes, metric="ACC", lambdas=(0.0,)):
    spec = ModelSpec(
        response=metric, parametric_terms=(), smooth_terms=(SmoothTerm(by_factor=None),)
    )
    obs = observation_rows(values, sizes, metric=metric)
    return betagam.fit(spec, obs, lambdas=list(lambdas))


class TestGamInversion:
    def test_matches_bisection_on_monotone_curve(self, calibrated_acc_model):
        model = calibrated_acc_model
        cell = {"tuning": "deep", "dataset": "AU", "architecture": "dnsNet121"}
        query = PlanQuery("ACC", 0.95, search_ceiling=5000)
        result = gam_required_sample_size(model, cell, query)
        assert result.required_n is not None
        # bisection oracle over the same integer grid
        lo, hi = 1, query.search_ceiling
        assert model.predict({**cell, "num_tr_images": hi}) >= 0.95
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if model.predict({**cell, "num_tr_images": mid}) >= 0.95:
                hi = mid
            else:
                lo = mid
        bisected = hi if model.predict({**cell, "num_tr_images": 1}) < 0.95 else 1
        assert result.required_n == bisected

    def test_unattainable_target(self, calibrated_acc_model):
        cell = {"tuning": "deep", "dataset": "WI", "architecture": "resNet18"}
        query = PlanQuery("ACC", 0.9999, search_ceiling=2000)
        result = gam_required_sample_size(calibrated_acc_model, cell, query)
        assert result.required_n is None

    def test_last_crossing_rule_on_dipped_curve(self):
        # spline interpolating a dip below target between the 2nd and 4th sizes
        sizes = (10, 20, 50, 150, 500, 1000)
        values = (0.90, 0.96, 0.93, 0.96, 0.98, 0.99)
        model = _fit_single_smooth(values, sizes)
        cell = {"num_tr_images": 1}
        query = PlanQuery("ACC", 0.95, search_ceiling=2000)
        result = gam_required_sample_size(model, cell, query)
        n = result.required_n
        preds = model.predict_sizes(cell, np.arange(1, 2001))
        assert np.all(preds[n - 1 :] >= 0.95)
        assert preds[n - 2] < 0.95
        # the naive first crossing sits inside the dip, before 50
        first_crossing = int(np.flatnonzero(preds >= 0.95)[0]) + 1
        assert first_crossing < 50 < n

    def test_extrapolation_flagged(self, calibrated_acc_model):
        cell = {"tuning": "deep", "dataset": "WI", "architecture": "resNet18"}
        query = PlanQuery("ACC", 0.985, search_ceiling=100_000)
        result = gam_required_sample_size(calibrated_acc_model, cell, query)
        if result.required_n is not None and result.required_n > 1000:
            assert result.extrapolated

    def test_unknown_level_rejected(self, calibrated_acc_model):
        cell = {"tuning": "deep", "dataset": "MARS", "architecture": "dnsNet121"}
        with pytest.raises(InputError):
            gam_required_sample_size(calibrated_acc_model, cell, PlanQuery("ACC", 0.9))


class TestPlanReport:
    def test_binding_requirement_from_presets(self):
        report = plan_report({"ACC": 0.95, "FPR": 0.02}, table1_presets())
        assert report.binding_n == 1097
        by_metric = {r.metric: r for r in report.results}
        assert by_metric["ACC"].required_n == 149
        assert by_metric["FPR"].required_n == 1097

    def test_single_target_report(self):
        report = plan_report({"ACC": 0.95}, table1_presets())
        assert len(report.results) == 1
        assert report.binding_n == report.results[0].required_n == 149

    def test_omitted_metrics_not_reported(self):
        report = plan_report({"ACC": 0.95}, table1_presets())
        assert [r.metric for r in report.results] == ["ACC"]

    def test_all_unattainable_is_explicit(self):
        from camcurves import LearningCurveModel

        falling = LearningCurveModel(
            metric="ACC", intercept=0.6, slope=-0.01, transform="log_n",
            adj_r_squared=0.5, n_obs=6,
        )
        with pytest.raises(InfeasiblePlanError):
            plan_report({"ACC": 0.99}, {"ACC": falling})

    def test_empty_targets_rejected(self):
        with pytest.raises(InputError):
            plan_report({}, table1_presets())
