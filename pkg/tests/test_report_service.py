"""Testes da renderização markdown dos achados."""

import pytest

from app.core.exceptions import DataValidationError
from app.models.schemas import FindingSource, FindingsDocument
from app.services import report_service as report
from tests.helpers import finding, result


def _doc(findings, alpha=0.05, drops=()):
    return FindingsDocument(
        manifest_digest="abc123",
        metadata={"alpha": alpha, "drops": list(drops)},
        findings=findings,
    )


class TestRenderCell:
    def test_significant_group(self):
        cell, value = report.render_cell(finding("anger", "M", [result("F", 0.093)]))
        assert (cell, value) == ("M → F", "9.30")

    def test_nothing_significant(self):
        cell, value = report.render_cell(finding("anger", "F", [result("M", 0.2, p=0.4)]))
        assert (cell, value) == ("F/M", "0")

    def test_mixed_race(self):
        f = finding(
            "fear", "W",
            [result("B", 0.12), result("I", 0.05, p=0.2), result("A", 0.01, p=0.6)],
            attribute="race",
        )
        assert report.render_cell(f) == ("W/I/A → B", "12.00")

    def test_several_significant_keep_schema_order(self):
        f = finding("fear", "W", [result("B", 0.12), result("I", 0.05, p=0.2), result("A", 0.031)])
        assert report.render_cell(f) == ("W/I → B/A", "12.00/3.10")

    def test_abbreviations(self):
        f = finding("anger", "Male", [result("Female", 0.1)])
        abbrev = report.parse_abbreviations(["Female=F", "Male=M"])
        assert report.render_cell(f, abbrev)[0] == "M → F"

    def test_highlight(self):
        f = finding("fear", "W", [result("B", 0.12), result("A", 0.03)])
        assert report.render_cell(f, highlight_above=10.0)[1] == "**12.00**/3.00"

    @pytest.mark.parametrize("item", ["Female", "=F", "Female="])
    def test_bad_abbreviation(self, item):
        with pytest.raises(DataValidationError):
            report.parse_abbreviations([item])


class TestRenderReport:
    def test_sections_and_footer(self):
        dia = _doc([finding("anger", "M", [result("F", 0.093)]), finding("fear", "F", [result("M", 0.1, p=0.3)])])
        dip = _doc([finding("anger", "F", [result("M", 0.2)], source=FindingSource.DIP)])
        text = report.render_report([dia, dip])
        assert "## Differential association (DiA): gender" in text
        assert "## Performance disparity (DEO): gender" in text
        assert "| anger | M → F | 9.30 |" in text
        assert "| fear | F/M | 0 |" in text
        assert "Tests performed: 3 (no multiple-comparison correction)" in text
        assert "alpha = 0.05" in text
        assert "Manifest: abc123." in text
        assert text.rstrip().endswith(report.CAVEAT)

    def test_drops_listed(self):
        drop = {"expression": "anger", "attribute": "race", "group": "Indian", "n": 3,
                "reason": "n < min_stratum_size (20)"}
        text = report.render_report([_doc([finding("anger", "F", [result("M", 0.2)])], drops=[drop])])
        assert "## Dropped strata" in text
        assert "- race / anger, group Indian (n=3): n < min_stratum_size (20)" in text

    def test_missing_required_attribute(self):
        with pytest.raises(DataValidationError, match="race"):
            report.render_report([_doc([finding("anger", "F", [result("M", 0.2)])])], attributes=["gender", "race"])

    def test_mixed_alphas(self):
        docs = [_doc([finding("anger", "F", [result("M", 0.2)])], alpha=0.05),
                _doc([finding("fear", "F", [result("M", 0.2)])], alpha=0.01)]
        assert "alpha = mixed" in report.render_report(docs)

    def test_no_documents(self):
        with pytest.raises(DataValidationError):
            report.render_report([])
