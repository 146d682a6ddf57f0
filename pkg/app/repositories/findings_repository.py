"""
Camada de persistência dos resultados: achados, manifesto, tabelas e CSVs de avaliação.

Todo arquivo gravado por bias-dia e bias-dip cita o digest do manifesto da execução.
Saída determinística: ordem de chaves fixa, floats em repr (sem perda),
quebras de linha "\n". Reexecuções idênticas produzem os mesmos bytes.

Formatos:
    findings.json   FindingsDocument (manifest_digest, metadata, findings)
    findings.csv    expression,attribute,reference_group,source,group,observed,p,
                    validated,method,b_used,manifest_digest
    association     expression,group,A,count_e,count_s,manifest_digest (+ .json)
    strata          expression,attribute,group,n,correct,tpr,manifest_digest (+ .json)
    avaliação       expression,l1_percent,reference_match | alpha,avg_bias_percent
                    | run,avg_bias_percent  (valores × 100, 2 casas)
"""

import csv
import json
import math
from collections import OrderedDict
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import ValidationError

from app.core.exceptions import DataValidationError
from app.models.schemas import (
    AlphaSweep,
    AssociationTable,
    BiasFinding,
    ComparisonRow,
    FindingsDocument,
    RunAvgBias,
    RunManifest,
    StratumOutcome,
    TestResult,
)
from app.utils.logger import get_logger

logger = get_logger(__name__)

FINDINGS_CSV_COLUMNS = (
    "expression", "attribute", "reference_group", "source", "group",
    "observed", "p", "validated", "method", "b_used", "manifest_digest",
)


def percent(value: float) -> str:
    """Convenção de relatório: valor × 100 com 2 casas; NaN vira 'nan'."""
    return "nan" if math.isnan(value) else f"{value * 100:.2f}"


def _dump_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


class FindingsRepository:
    """Leitura e escrita de artefatos de resultado."""

    # =========================================================================
    # ACHADOS
    # =========================================================================

    def write_findings_json(self, doc: FindingsDocument, path: str | Path) -> Path:
        path = _prepare(path)
        path.write_text(_dump_json(doc.model_dump(mode="json")), encoding="utf-8")
        logger.info(f"Achados gravados | path={path} | achados={len(doc.findings)}")
        return path

    def write_findings_csv(self, doc: FindingsDocument, path: str | Path) -> Path:
        rows = (
            [f.expression, f.attribute, f.reference_group, f.source.value, e.group,
             repr(e.observed), repr(e.p), repr(e.validated), e.method.value, e.b_used,
             doc.manifest_digest]
            for f in doc.findings
            for e in f.entries
        )
        path = _write_rows(path, FINDINGS_CSV_COLUMNS, rows)
        logger.info(f"Achados gravados (CSV) | path={path}")
        return path

    def load_findings(self, path: str | Path) -> FindingsDocument:
        """Carrega achados de .json (documento completo) ou .csv (uma linha por teste)."""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Arquivo de achados não encontrado: {path}")
        try:
            if path.suffix.lower() == ".csv":
                return self._load_findings_csv(path)
            return FindingsDocument.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise DataValidationError(f"{path}: achados inválidos ({exc.errors()[0]['msg']}).") from exc

    def _load_findings_csv(self, path: Path) -> FindingsDocument:
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in FINDINGS_CSV_COLUMNS if c not in (reader.fieldnames or [])]
            if missing:
                raise DataValidationError(f"{path}: colunas ausentes {missing}.")
            rows = list(reader)

        digests = {r["manifest_digest"] for r in rows}
        if len(digests) > 1:
            raise DataValidationError(f"{path}: linhas citam manifestos diferentes.")

        grouped: "OrderedDict[tuple[str, str, str, str], list[TestResult]]" = OrderedDict()
        for r in rows:
            key = (r["expression"], r["attribute"], r["reference_group"], r["source"])
            grouped.setdefault(key, []).append(TestResult(
                group=r["group"],
                observed=float(r["observed"]),
                p=float(r["p"]),
                validated=float(r["validated"]),
                method=r["method"],
                b_used=int(r["b_used"]),
            ))
        findings = [
            BiasFinding(expression=e, attribute=a, reference_group=ref, source=src, entries=entries)
            for (e, a, ref, src), entries in grouped.items()
        ]
        return FindingsDocument(manifest_digest=digests.pop() if digests else "", findings=findings)

    # =========================================================================
    # MANIFESTO
    # =========================================================================

    def write_manifest(self, manifest: RunManifest, path: str | Path) -> Path:
        path = _prepare(path)
        payload = {"digest": manifest.digest, **manifest.model_dump(mode="json")}
        path.write_text(_dump_json(payload), encoding="utf-8")
        logger.info(f"Manifesto gravado | path={path} | digest={manifest.digest[:12]}")
        return path

    def load_manifest(self, path: str | Path) -> RunManifest:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Manifesto não encontrado: {path}")
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))

    # =========================================================================
    # TABELAS AUXILIARES
    # =========================================================================

    def write_association_csv(
        self, tables: Sequence[AssociationTable], digest: str, path: str | Path
    ) -> Path:
        rows = []
        for t in tables:
            for i, e in enumerate(t.expressions):
                for j, g in enumerate(t.groups):
                    rows.append([e, g, repr(float(t.values[i, j])), t.counts_e[i], t.counts_s[j], digest])
        return _write_rows(path, ("expression", "group", "A", "count_e", "count_s", "manifest_digest"), rows)

    def write_association_json(self, tables: Sequence[AssociationTable], digest: str, path: str | Path) -> Path:
        path = _prepare(path)
        payload = {
            "manifest_digest": digest,
            "tables": [
                {
                    "attribute": t.attribute,
                    "expressions": list(t.expressions),
                    "groups": list(t.groups),
                    "values": np.asarray(t.values).tolist(),
                    "counts_e": list(t.counts_e),
                    "counts_s": list(t.counts_s),
                }
                for t in tables
            ],
        }
        path.write_text(_dump_json(payload), encoding="utf-8")
        return path

    def write_strata_csv(
        self, strata: Sequence[tuple[str, StratumOutcome]], digest: str, path: str | Path
    ) -> Path:
        """strata: pares (atributo, estrato)."""
        rows = (
            [s.expression, attribute, s.group, s.n, s.correct, repr(s.correct / s.n) if s.n else "nan", digest]
            for attribute, s in strata
        )
        return _write_rows(
            path, ("expression", "attribute", "group", "n", "correct", "tpr", "manifest_digest"), rows
        )

    def write_strata_json(
        self, strata: Sequence[tuple[str, StratumOutcome]], digest: str, path: str | Path
    ) -> Path:
        path = _prepare(path)
        payload = {
            "manifest_digest": digest,
            "strata": [
                {
                    "expression": s.expression,
                    "attribute": attribute,
                    "group": s.group,
                    "n": s.n,
                    "correct": s.correct,
                    "tpr": s.correct / s.n if s.n else None,
                }
                for attribute, s in strata
            ],
        }
        path.write_text(_dump_json(payload), encoding="utf-8")
        return path

    # =========================================================================
    # AVALIAÇÃO
    # =========================================================================

    def write_comparison_csv(self, rows: Sequence[ComparisonRow], path: str | Path) -> Path:
        return _write_rows(
            path,
            ("expression", "l1_percent", "reference_match"),
            ([r.expression, percent(r.l1), str(r.reference_match).lower()] for r in rows),
        )

    def write_alpha_sweep_csv(self, sweep: AlphaSweep, path: str | Path) -> Path:
        return _write_rows(
            path,
            ("alpha", "avg_bias_percent"),
            ([f"{a:.2f}", percent(r.value)] for a, r in zip(sweep.alphas, sweep.curve)),
        )

    def write_runs_csv(self, runs: Sequence[RunAvgBias], path: str | Path) -> Path:
        return _write_rows(path, ("run", "avg_bias_percent"), ([r.run, percent(r.result.value)] for r in runs))

    def write_json(self, payload: Any, path: str | Path) -> Path:
        path = _prepare(path)
        path.write_text(_dump_json(payload), encoding="utf-8")
        return path

    def write_text(self, text: str, path: str | Path) -> Path:
        path = _prepare(path)
        path.write_text(text, encoding="utf-8")
        return path
