"""Testes do gerador de cenários sintéticos."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.models.schemas import AttributeSchema, NullSpec, ScenarioSpec
from app.services import association_service as assoc
from app.services import perfmetrics_service as perf
from app.services import synthgen_service as synth
from app.services.embedding_service import normalize, partition

SWEEP = 200


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _table(test, probe, expressions, schema):
    test_parts = partition(normalize(test), "expression", expressions)
    probe_parts = partition(normalize(probe), schema.name, schema)
    return assoc.association_table(test_parts, probe_parts, schema.name)


def _assert_centered(values):
    values = np.asarray(values, dtype=np.float64)
    se = values.std(ddof=1) / math.sqrt(values.size)
    assert abs(values.mean()) <= 4 * se


class TestGenBiased:
    def test_deterministic(self, small_spec):
        a_test, a_probe, a_preds = synth.gen_biased(small_spec)
        b_test, b_probe, b_preds = synth.gen_biased(small_spec)
        np.testing.assert_array_equal(a_test.vectors, b_test.vectors)
        np.testing.assert_array_equal(a_probe.vectors, b_probe.vectors)
        assert a_preds.predicted_class == b_preds.predicted_class

    def test_seed_changes_data(self, small_spec):
        a_test, _, _ = synth.gen_biased(small_spec)
        b_test, _, _ = synth.gen_biased(small_spec.model_copy(update={"seed": 12}))
        assert not np.array_equal(a_test.vectors, b_test.vectors)

    def test_shapes_ids_and_labels(self, small_scenario, small_spec):
        test, probe, preds = small_scenario
        assert test.vectors.shape == (3 * 30, 8)
        assert probe.vectors.shape == (2 * 40, 8)
        assert test.ids[0] == "test_neutral_00000"
        assert probe.ids[-1] == "probe_M_00039"
        assert test.labels["expression"].count("anger") == 30
        assert probe.labels["gender"].count("F") == 40
        assert preds.ids == test.ids
        assert preds.true_class == test.labels["expression"]
        assert set(preds.predicted_class) <= set(small_spec.expressions)
        assert set(preds.attribute_labels["gender"]) == {"F", "M"}

    def test_planted_group_closer_to_target(self, small_scenario):
        test, probe, _ = small_scenario
        anger = unit(test.vectors[np.asarray(test.labels["expression"]) == "anger"]).mean(axis=0)
        labels = np.asarray(probe.labels["gender"])
        z = unit(probe.vectors)
        assert (z[labels == "M"] @ anger).mean() > (z[labels == "F"] @ anger).mean()

    def test_accuracy_gap_in_predictions(self, gender):
        spec = ScenarioSpec(
            dim=4, expressions=("neutral", "anger"), groups=gender, target_expression="anger",
            tilted_group="M", expression_size=4000, group_size=1, base_accuracy=0.5, accuracy_gap=0.4, seed=3,
        )
        _, _, preds = synth.gen_biased(spec)
        hits = {"F": [], "M": []}
        for t, p, g in zip(preds.true_class, preds.predicted_class, preds.attribute_labels["gender"]):
            if t == "anger":
                hits[g].append(t == p)
        assert np.mean(hits["M"]) == pytest.approx(0.9, abs=0.03)
        assert np.mean(hits["F"]) == pytest.approx(0.5, abs=0.04)

    def test_single_expression_rejected(self, gender):
        spec = ScenarioSpec(expressions=("anger",), groups=gender, target_expression="anger",
                            tilted_group="M", seed=0)
        with pytest.raises(ValueError):
            synth.gen_biased(spec)

    @pytest.mark.parametrize("field", ["expression_size", "group_size"])
    def test_zero_sizes_rejected(self, small_spec, field):
        with pytest.raises(ValidationError):
            ScenarioSpec(**{**small_spec.model_dump(), field: 0})

    def test_unknown_tilted_group(self, small_spec):
        with pytest.raises(ValidationError, match="tilted_group"):
            ScenarioSpec(**{**small_spec.model_dump(), "tilted_group": "X"})


class TestAnchors:
    def test_drawn_anchors_are_orthonormal(self, small_spec):
        meta = synth.anchor_metadata(small_spec)
        assert meta["anchors"][0] == "expression:neutral"
        assert meta["anchors"][-1] == "group:M"
        np.testing.assert_allclose(np.asarray(meta["pairwise_cosines"]), np.eye(5), atol=1e-9)

    def test_explicit_anchors_used(self, small_spec):
        eye = np.eye(8)
        spec = small_spec.model_copy(update={
            "expression_anchors": eye[:3].tolist(),
            "group_anchors": eye[3:5].tolist(),
        })
        expr, grp = synth.scenario_anchors(spec)
        np.testing.assert_array_equal(expr, eye[:3])
        np.testing.assert_array_equal(grp, eye[3:5])

    def test_non_unit_anchor_rejected(self, small_spec):
        with pytest.raises(ValidationError, match="unit"):
            ScenarioSpec(**{**small_spec.model_dump(), "group_anchors": [[2.0] + [0.0] * 7, [0.0, 1.0] + [0.0] * 6]})


class TestGenNull:
    def test_groups_share_distribution_shape(self):
        spec = NullSpec(groups=AttributeSchema(name="gender", groups=("F", "M")), dim=8,
                        expression_size=20, group_size=25, seed=4)
        test, probe, preds = synth.gen_null(spec)
        assert test.vectors.shape == (40, 8)
        assert probe.vectors.shape == (50, 8)
        assert preds.class_vocabulary == ("neutral", "happiness")

    def test_deterministic(self):
        spec = NullSpec(groups=AttributeSchema(name="gender", groups=("F", "M")), dim=8, seed=9)
        np.testing.assert_array_equal(synth.gen_null(spec)[1].vectors, synth.gen_null(spec)[1].vectors)

    def test_dia_symmetric_under_relabeling(self, gender):
        # Grupos trocáveis: DiA(F, M) e DiA(M, F) têm a mesma distribuição entre seeds.
        values = []
        for seed in range(SWEEP):
            spec = NullSpec(groups=gender, dim=8, expression_size=20, group_size=20, seed=seed)
            test, probe, _ = synth.gen_null(spec)
            values.append(assoc.dia(_table(test, probe, spec.expressions, gender), "neutral", "F", "M"))
        _assert_centered(values)
        assert 70 <= sum(v > 0 for v in values) <= 130

    def test_tpr_gap_centered(self, gender):
        gaps = []
        for seed in range(SWEEP):
            spec = NullSpec(groups=gender, dim=4, expression_size=40, group_size=1, seed=seed)
            _, _, preds = synth.gen_null(spec)
            f, m = perf.stratify(preds, "neutral", gender)
            gaps.append(perf.tpr(f) - perf.tpr(m))
        _assert_centered(gaps)


class TestTiltSweep:
    def _dia_anger(self, gender, tilt):
        values = []
        for seed in range(SWEEP):
            spec = ScenarioSpec(
                dim=8, expressions=("neutral", "anger"), groups=gender, target_expression="anger",
                tilted_group="M", tilt=tilt, expression_size=20, group_size=20, seed=seed,
            )
            test, probe, _ = synth.gen_biased(spec)
            values.append(assoc.dia(_table(test, probe, spec.expressions, gender), "anger", "M", "F"))
        return values

    def test_zero_tilt_has_no_mean_dia(self, gender):
        _assert_centered(self._dia_anger(gender, 0.0))

    def test_unit_tilt_shifts_mean_dia(self, gender):
        values = np.asarray(self._dia_anger(gender, 1.0))
        assert values.mean() > 4 * values.std(ddof=1) / math.sqrt(values.size)


def test_demo_spec(race):
    spec = synth.demo_spec(5)
    assert spec.expressions == synth.DEMO_EXPRESSIONS
    assert spec.groups == synth.DEMO_SCHEMA
    assert spec.tilted_group == "M"
    assert (spec.base_accuracy, spec.accuracy_gap) == (0.7, 0.2)
    assert synth.demo_spec(5, race).tilted_group == race.groups[-1]
