"""Testes de estratificação, TPR, DEO e política de estratos pequenos."""

import numpy as np
import pytest

from app.core.exceptions import DataValidationError
from app.models.schemas import AttributeSchema, PerformanceMetric, StratumOutcome
from app.services import perfmetrics_service as perf
from tests.helpers import make_predictions


def _stratum(group: str, hits: list[int], expression: str = "anger") -> StratumOutcome:
    ind = np.asarray(hits, dtype=np.float64)
    return StratumOutcome(expression=expression, group=group, n=ind.size, correct=int(ind.sum()), indicators=ind)


def _anger_log():
    rows = [("anger", "anger", "F")] * 4 + [("anger", "fear", "F")] * 2
    rows += [("anger", "anger", "M")] * 1 + [("anger", "sadness", "M")] * 3
    rows += [("fear", "fear", "F"), ("fear", "anger", "M")]
    return make_predictions(rows)


class TestStratify:
    def test_counts(self, gender):
        strata = perf.stratify(_anger_log(), "anger", gender)
        assert [(s.group, s.n, s.correct) for s in strata] == [("F", 6, 4), ("M", 4, 1)]

    def test_counts_sum_to_expression_total(self, gender):
        preds = _anger_log()
        strata = perf.stratify(preds, "anger", gender)
        assert sum(s.n for s in strata) == sum(1 for t in preds.true_class if t == "anger")

    def test_empty_stratum_names_cell(self, gender):
        preds = make_predictions([("anger", "anger", "F"), ("fear", "fear", "M")])
        with pytest.raises(DataValidationError, match=r"anger.*\['M'\]"):
            perf.stratify(preds, "anger", gender)

    def test_missing_attribute_column(self, race):
        with pytest.raises(DataValidationError, match="race"):
            perf.stratify(_anger_log(), "anger", race)

    def test_expression_outside_vocabulary(self, gender):
        with pytest.raises(DataValidationError, match="joy"):
            perf.stratify(_anger_log(), "joy", gender)

    def test_unknown_and_missing_labels_excluded_and_counted(self, gender):
        preds = make_predictions([
            ("anger", "anger", "F"), ("anger", "anger", "M"), ("anger", "fear", ""), ("anger", "anger", "X"),
        ])
        strata = perf.stratify(preds, "anger", gender)
        assert sum(s.n for s in strata) == 2
        assert perf.count_excluded(preds, gender) == 2

    def test_relabeling_permutes_strata(self):
        preds = _anger_log()
        a = perf.stratify(preds, "anger", AttributeSchema(name="gender", groups=("F", "M")))
        b = perf.stratify(preds, "anger", AttributeSchema(name="gender", groups=("M", "F")))
        assert sorted((s.n, s.correct) for s in a) == sorted((s.n, s.correct) for s in b)


class TestMinStratumSize:
    def test_groups_below_threshold_dropped(self):
        strata = [_stratum("W", [1] * 30), _stratum("B", [1] * 5), _stratum("A", [0] * 25)]
        kept, drops = perf.apply_min_stratum_size(strata, "race", 20)
        assert [s.group for s in kept] == ["W", "A"]
        assert [(d.group, d.n) for d in drops] == [("B", 5)]
        assert "min_stratum_size" in drops[0].reason


class TestMetrics:
    @pytest.mark.parametrize("hits, expected", [([1, 1, 1], 1.0), ([0, 0], 0.0), ([1, 1, 1, 0], 0.75)])
    def test_tpr(self, hits, expected):
        assert perf.tpr(_stratum("F", hits)) == expected

    def test_tpr_order_invariant(self):
        assert perf.tpr(_stratum("F", [0, 1, 1, 1])) == perf.tpr(_stratum("F", [1, 1, 0, 1]))

    def test_tpr_empty(self):
        with pytest.raises(DataValidationError):
            perf.tpr(_stratum("F", []))

    def test_metric_registry_routes_tpr(self):
        s = _stratum("F", [1, 1, 0, 1])
        assert perf.metric(s) == perf.tpr(s)
        assert perf.metric(s, PerformanceMetric("tpr")) == 0.75

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            perf.metric(_stratum("F", [1]), "fpr")

    @pytest.mark.parametrize("a, b, expected", [(0.6, 0.6, 0.0), (1.0, 0.0, 1.0), (0.75, 0.5, 0.25)])
    def test_dip(self, a, b, expected):
        assert perf.dip(a, b) == expected


class TestReference:
    def test_first_of_max(self):
        strata = [_stratum("W", [1] * 9 + [0]), _stratum("B", [1] * 7 + [0] * 3), _stratum("A", [1] * 7 + [0] * 3)]
        assert perf.reference_group_perf(strata) == "W"

    def test_all_equal(self):
        strata = [_stratum("W", [1, 0]), _stratum("B", [1, 1, 0, 0]), _stratum("A", [0, 1])]
        assert perf.reference_group_perf(strata) == "W"

    def test_exact_rational_tie(self):
        strata = [_stratum("F", [1] * 7 + [0] * 3), _stratum("M", [1] * 14 + [0] * 6)]
        assert perf.reference_group_perf(strata) == "F"

    def test_max_last(self):
        strata = [_stratum("W", [0, 1]), _stratum("B", [0, 0]), _stratum("A", [1, 1])]
        assert perf.reference_group_perf(strata) == "A"

    def test_needs_two_strata(self):
        with pytest.raises(DataValidationError):
            perf.reference_group_perf([_stratum("F", [1])])

    def test_finding_entries_in_unit_range(self):
        strata = [_stratum("W", [1, 0, 0, 0]), _stratum("B", [1, 1, 1, 0]), _stratum("A", [1, 1, 0, 0])]
        finding = perf.dip_finding(strata, "race")
        assert finding.reference_group == "B"
        assert [(e.group, e.observed) for e in finding.entries] == [("W", 0.5), ("A", 0.25)]

    def test_finding_with_named_metric(self):
        strata = [_stratum("F", [1, 1, 0, 0]), _stratum("M", [1, 0, 0, 0])]
        assert perf.dip_finding(strata, "gender", PerformanceMetric.TPR) == perf.dip_finding(strata, "gender")
