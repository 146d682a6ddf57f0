"""Testes de ponta a ponta da CLI: synth → bias-dia/bias-dip → avaliação → relatório."""

import json

import pytest

from app.main import EXIT_OK, EXIT_VALIDATION, main
from app.services import synthgen_service

COMMON = ["--b", "100", "--alpha", "0.05", "--seed", "7"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = main([
        "synth", "--seed", "7", "--dim", "8", "--expression-size", "20", "--group-size", "30",
        "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    return out


def _dia_args(data_dir, out_dir, *extra):
    return [
        "bias-dia",
        "--test-embeddings", str(data_dir / "test_embeddings.febe"),
        "--probe-embeddings", str(data_dir / "probe_embeddings.febe"),
        "--attribute", str(data_dir / "gender.txt"),
        "--expressions", str(data_dir / "expressions.txt"),
        *COMMON,
        "--out-dir", str(out_dir),
        *extra,
    ]


def _dip_args(data_dir, out_dir, *extra):
    return [
        "bias-dip",
        "--predictions", str(data_dir / "predictions.csv"),
        "--attribute", str(data_dir / "gender.txt"),
        "--expressions", str(data_dir / "expressions.txt"),
        *COMMON,
        "--out-dir", str(out_dir),
        *extra,
    ]


def _findings(path):
    return json.loads(path.read_text(encoding="utf-8"))


def _assert_outputs_cite_digest(out_dir):
    digest = _findings(out_dir / "manifest.json")["digest"]
    files = sorted(p for p in out_dir.iterdir() if p.is_file())
    assert len(files) >= 4
    for path in files:
        assert digest in path.read_text(encoding="utf-8"), path.name


class TestSynth:
    def test_files(self, data_dir):
        for name in ("test_embeddings.febe", "probe_embeddings.febe", "predictions.csv",
                     "expressions.txt", "gender.txt", "manifest.json", "scenario.json"):
            assert (data_dir / name).is_file()
        assert (data_dir / "gender.txt").read_text(encoding="utf-8").split() == ["F", "M"]

    def test_csv_embeddings(self, tmp_path):
        code = main(["synth", "--seed", "1", "--dim", "4", "--expression-size", "3", "--group-size", "3",
                     "--embedding-format", "csv", "--scenario", "null", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "test_embeddings.csv").is_file()

    def test_defaults_come_from_demo_spec(self, tmp_path):
        assert main(["synth", "--seed", "3", "--dim", "8", "--expression-size", "5", "--group-size", "6",
                     "--out-dir", str(tmp_path)]) == EXIT_OK
        spec = _findings(tmp_path / "scenario.json")["spec"]
        expected = synthgen_service.demo_spec(3).model_dump(mode="json")
        assert spec == {**expected, "dim": 8, "expression_size": 5, "group_size": 6}

    def test_flags_override_demo_fields(self, tmp_path):
        assert main(["synth", "--seed", "3", "--dim", "4", "--expression-size", "3", "--group-size", "3",
                     "--tilt", "0", "--target-expression", "fear", "--tilted-group", "F",
                     "--out-dir", str(tmp_path)]) == EXIT_OK
        spec = _findings(tmp_path / "scenario.json")["spec"]
        assert (spec["tilt"], spec["target_expression"], spec["tilted_group"]) == (0.0, "fear", "F")
        assert spec["base_accuracy"] == 0.7

    def test_invalid_size(self, tmp_path):
        assert main(["synth", "--seed", "1", "--group-size", "0", "--out-dir", str(tmp_path)]) == EXIT_VALIDATION


class TestBiasDia:
    def test_shape_and_outputs(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path)) == EXIT_OK
        doc = _findings(tmp_path / "findings_dia.json")
        assert len(doc["findings"]) == 7
        assert all(len(f["entries"]) == 1 for f in doc["findings"])
        assert doc["metadata"]["tests_performed"] == 7
        assert doc["metadata"]["multiple_comparison_correction"] == "none"
        manifest = _findings(tmp_path / "manifest.json")
        assert doc["manifest_digest"] == manifest["digest"]
        assert (tmp_path / "association.csv").read_text(encoding="utf-8").count("\n") == 1 + 7 * 2
        tables = _findings(tmp_path / "association.json")
        assert tables["manifest_digest"] == manifest["digest"]
        assert [t["attribute"] for t in tables["tables"]] == ["gender"]
        assert len(tables["tables"][0]["values"]) == 7
        assert tables["tables"][0]["groups"] == ["F", "M"]

    @pytest.mark.parametrize("fmt", ["json", "csv", "md"])
    def test_every_output_cites_digest(self, data_dir, tmp_path, fmt):
        assert main(_dia_args(data_dir, tmp_path, "--format", fmt)) == EXIT_OK
        _assert_outputs_cite_digest(tmp_path)

    def test_rerun_is_byte_identical(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path / "a")) == EXIT_OK
        assert main(_dia_args(data_dir, tmp_path / "b")) == EXIT_OK
        assert (tmp_path / "a" / "findings_dia.json").read_bytes() == \
            (tmp_path / "b" / "findings_dia.json").read_bytes()

    def test_thread_count_does_not_change_findings(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path / "t1", "--threads", "1")) == EXIT_OK
        assert main(_dia_args(data_dir, tmp_path / "t8", "--threads", "8")) == EXIT_OK
        assert (tmp_path / "t1" / "findings_dia.json").read_bytes() == \
            (tmp_path / "t8" / "findings_dia.json").read_bytes()

    def test_planted_bias_found(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path)) == EXIT_OK
        anger = next(f for f in _findings(tmp_path / "findings_dia.json")["findings"] if f["expression"] == "anger")
        assert anger["reference_group"] == "M"
        assert anger["entries"][0]["validated"] > 0

    def test_csv_format(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path, "--format", "csv")) == EXIT_OK
        assert (tmp_path / "findings_dia.json").is_file()
        assert (tmp_path / "findings_dia.csv").read_text(encoding="utf-8").startswith("expression,attribute,")

    def test_md_format(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path, "--format", "md")) == EXIT_OK
        assert "| Expression | Groups | Validated (%) |" in (tmp_path / "findings_dia.md").read_text(encoding="utf-8")

    def test_missing_probe_file(self, data_dir, tmp_path):
        args = _dia_args(data_dir, tmp_path)
        args[args.index("--probe-embeddings") + 1] = str(tmp_path / "missing.febe")
        assert main(args) == EXIT_VALIDATION
        assert not (tmp_path / "findings_dia.json").exists()

    def test_exclude_ids(self, data_dir, tmp_path):
        exclude = tmp_path / "exclude.txt"
        exclude.write_text("test_anger_00000\nprobe_F_00000\n", encoding="utf-8")
        assert main(_dia_args(data_dir, tmp_path / "out", "--exclude-ids", str(exclude))) == EXIT_OK
        manifest = _findings(tmp_path / "out" / "manifest.json")
        assert "exclude_ids" in manifest["inputs"]


class TestBiasDip:
    def test_shape_and_strata(self, data_dir, tmp_path):
        assert main(_dip_args(data_dir, tmp_path)) == EXIT_OK
        doc = _findings(tmp_path / "findings_dip.json")
        assert len(doc["findings"]) == 7
        strata = (tmp_path / "strata.csv").read_text(encoding="utf-8").splitlines()
        assert strata[0] == "expression,attribute,group,n,correct,tpr,manifest_digest"
        assert len(strata) == 1 + 7 * 2
        payload = _findings(tmp_path / "strata.json")
        assert payload["manifest_digest"] == _findings(tmp_path / "manifest.json")["digest"]
        assert len(payload["strata"]) == 7 * 2

    @pytest.mark.parametrize("fmt", ["json", "csv", "md"])
    def test_every_output_cites_digest(self, data_dir, tmp_path, fmt):
        assert main(_dip_args(data_dir, tmp_path, "--format", fmt)) == EXIT_OK
        _assert_outputs_cite_digest(tmp_path)

    def test_metric_recorded_in_manifest(self, data_dir, tmp_path):
        assert main(_dip_args(data_dir, tmp_path, "--metric", "tpr")) == EXIT_OK
        assert _findings(tmp_path / "manifest.json")["config"]["metric"] == "tpr"

    def test_unknown_metric(self, data_dir, tmp_path):
        with pytest.raises(SystemExit):
            main(_dip_args(data_dir, tmp_path, "--metric", "fpr"))

    def test_missing_attribute_column(self, data_dir, tmp_path):
        race = tmp_path / "race.txt"
        race.write_text("White\nBlack\n", encoding="utf-8")
        args = _dip_args(data_dir, tmp_path / "out")
        args[args.index("--attribute") + 1] = str(race)
        assert main(args) == EXIT_VALIDATION

    def test_min_stratum_size_drops_recorded(self, data_dir, tmp_path):
        assert main(_dip_args(data_dir, tmp_path, "--min-stratum-size", "15")) == EXIT_OK
        doc = _findings(tmp_path / "findings_dip.json")
        assert doc["findings"] == []
        assert len(doc["metadata"]["drops"]) == 7 * 3

    def test_bad_estimator(self, data_dir, tmp_path):
        with pytest.raises(SystemExit):
            main(_dip_args(data_dir, tmp_path, "--estimator", "exact"))


class TestEvaluation:
    @pytest.fixture
    def dia_findings(self, data_dir, tmp_path):
        assert main(_dia_args(data_dir, tmp_path / "dia")) == EXIT_OK
        return tmp_path / "dia" / "findings_dia.json"

    def test_compare_with_itself(self, dia_findings, tmp_path):
        out = tmp_path / "cmp"
        assert main(["compare", "--truth", str(dia_findings), "--method", f"self={dia_findings}",
                     "--out-dir", str(out)]) == EXIT_OK
        rows = _findings(out / "comparison.json")["rows"]
        assert len(rows) == 7
        assert all(r["l1"] == 0.0 and r["reference_match"] for r in rows)
        lines = (out / "compare_self_gender.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "expression,l1_percent,reference_match"
        assert all(line.endswith(",0.00,true") for line in lines[1:])

    def test_alpha_sweep(self, dia_findings, tmp_path):
        out = tmp_path / "sweep"
        assert main(["alpha-sweep", "--findings", str(dia_findings), "--out-dir", str(out)]) == EXIT_OK
        lines = (out / "alpha_sweep.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "alpha,avg_bias_percent"
        assert [line.split(",")[0] for line in lines[1:]] == [f"{0.01 * i:.2f}" for i in range(1, 11)]

    def test_avgbias_single(self, dia_findings, tmp_path, capsys):
        assert main(["avgbias", "--findings", str(dia_findings), "--out-dir", str(tmp_path / "avg")]) == EXIT_OK
        assert "AvgBias =" in capsys.readouterr().out
        assert _findings(tmp_path / "avg" / "avgbias.json")["normalization"]

    def test_avgbias_runs(self, dia_findings, tmp_path):
        out = tmp_path / "runs"
        assert main(["avgbias", "--findings", f"a={dia_findings}", "--findings", f"b={dia_findings}",
                     "--out-dir", str(out)]) == EXIT_OK
        lines = (out / "runs.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "run,avg_bias_percent"
        assert [line.split(",")[0] for line in lines[1:]] == ["a", "b"]

    def test_report(self, dia_findings, tmp_path, capsys):
        out = tmp_path / "rep"
        assert main(["report", str(dia_findings), "--out-dir", str(out)]) == EXIT_OK
        text = (out / "report.md").read_text(encoding="utf-8")
        assert "Tests performed: 7" in text
        assert "| anger |" in capsys.readouterr().out

    def test_report_missing_attribute(self, dia_findings, tmp_path):
        assert main(["report", str(dia_findings), "--require-attribute", "race",
                     "--out-dir", str(tmp_path)]) == EXIT_VALIDATION

    def test_missing_findings_file(self, tmp_path):
        assert main(["alpha-sweep", "--findings", str(tmp_path / "none.json"),
                     "--out-dir", str(tmp_path)]) == EXIT_VALIDATION
