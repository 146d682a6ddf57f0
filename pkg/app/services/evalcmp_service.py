"""
Serviço de avaliação: concordância com o ground truth, AvgBias e varredura de α.

- l1_compare: média de |Ṽ_M − Ṽ_GT| sobre os n−1 grupos; NaN se as referências diferem
- avg_bias: média dos valores validados, normalizada por atributo
    AvgBias = (1/|S|) Σ_S (1/|E_S|) Σ_e (1/(n_S − 1)) Σ_k Ṽ
  Achados cuja referência difere da do ground truth (quando informado) são
  excluídos na granularidade de entrada; as exclusões são sempre contadas.
- alpha_sweep: reaplica o limiar sobre os (observado, p) já calculados,
  sem refazer permutações

Decisão técnica: nomes de grupo precisam coincidir exatamente (sem aliases).
"""

import math
from collections import defaultdict
from typing import Mapping, Optional, Sequence

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import DataValidationError
from app.models.schemas import (
    AlphaSweep,
    AvgBiasResult,
    BiasFinding,
    ComparisonRow,
    RunAvgBias,
)
from app.services.statmod_service import validate
from app.utils.logger import get_logger

logger = get_logger(__name__)
settings = get_settings()

FindingKey = tuple[str, str]  # (atributo, expressão)


def parse_alpha_range(spec: str) -> list[float]:
    """'0.01:0.10:0.01' → [0.01, 0.02, …, 0.10] (extremos inclusivos, 2 casas)."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise DataValidationError(f"Intervalo de α inválido: '{spec}' (use início:fim:passo).") from exc
    if step <= 0 or start <= 0 or stop >= 1 or start > stop:
        raise DataValidationError(f"Intervalo de α inválido: '{spec}'.")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def default_alphas() -> list[float]:
    return parse_alpha_range(settings.ALPHA_SWEEP)


def _index(findings: Sequence[BiasFinding]) -> dict[FindingKey, BiasFinding]:
    out: dict[FindingKey, BiasFinding] = {}
    for f in findings:
        key = (f.attribute, f.expression)
        if key in out:
            raise DataValidationError(f"Achado duplicado para attribute={key[0]}, expression={key[1]}.")
        out[key] = f
    return out


# =============================================================================
# L1
# =============================================================================

def l1_compare(method: BiasFinding, truth: BiasFinding, method_name: str = "") -> ComparisonRow:
    """L1^{e,M}; NaN quando s_max do método difere de s_max do ground truth."""
    if (method.expression, method.attribute) != (truth.expression, truth.attribute):
        raise DataValidationError(
            f"Achados de células diferentes: ({method.expression}, {method.attribute}) vs "
            f"({truth.expression}, {truth.attribute})."
        )
    if method.all_groups != truth.all_groups:
        raise DataValidationError(
            f"Conjuntos de grupos diferentes em ({truth.expression}, {truth.attribute}): "
            f"{sorted(method.all_groups)} vs {sorted(truth.all_groups)}."
        )

    if method.reference_group != truth.reference_group:
        return ComparisonRow(method=method_name, attribute=truth.attribute, expression=truth.expression,
                             l1=math.nan, reference_match=False)

    diffs = [abs(method.entry(t.group).validated - t.validated) for t in truth.entries]
    return ComparisonRow(
        method=method_name,
        attribute=truth.attribute,
        expression=truth.expression,
        l1=float(np.mean(diffs)),
        reference_match=True,
    )


def compare_findings(
    method: Sequence[BiasFinding], truth: Sequence[BiasFinding], method_name: str = ""
) -> list[ComparisonRow]:
    """Uma linha por (atributo, expressão) do ground truth, na ordem do ground truth."""
    m_index = _index(method)
    rows = []
    for t in truth:
        key = (t.attribute, t.expression)
        if key not in m_index:
            raise DataValidationError(f"Método '{method_name}' sem achado para attribute={key[0]}, expression={key[1]}.")
        rows.append(l1_compare(m_index[key], t, method_name))
    return rows


def compare_methods(
    truth: Sequence[BiasFinding], methods: Mapping[str, Sequence[BiasFinding]]
) -> tuple[list[ComparisonRow], dict[FindingKey, Optional[str]]]:
    """
    Compara vários métodos contra o ground truth.
    Retorna as linhas e, por (atributo, expressão), o método de menor L1 definido
    (empate → primeiro na ordem dada; None se todos forem NaN).
    """
    rows: list[ComparisonRow] = []
    for name, findings in methods.items():
        rows.extend(compare_findings(findings, truth, name))

    best: dict[FindingKey, Optional[str]] = {}
    for t in truth:
        key = (t.attribute, t.expression)
        candidates = [r for r in rows if (r.attribute, r.expression) == key and r.reference_match]
        best[key] = min(candidates, key=lambda r: r.l1).method if candidates else None
    return rows, best


# =============================================================================
# AvgBias
# =============================================================================

def avg_bias(
    findings: Sequence[BiasFinding],
    truth: Optional[Sequence[BiasFinding]] = None,
    alpha: Optional[float] = None,
) -> AvgBiasResult:
    """
    AvgBias com normalização (n−1) por atributo.

    alpha=None usa os valores validados gravados; caso contrário reaplica Ṽ = V·1(p < α).
    truth: quando informado, achados com referência diferente da do ground truth
    são excluídos (contados em excluded_nan).
    """
    if not findings:
        raise DataValidationError("AvgBias sobre lista vazia de achados.")
    truth_index = _index(truth) if truth is not None else None

    per_attribute: dict[str, list[float]] = defaultdict(list)
    included = excluded = 0
    for f in _index(findings).values():
        if truth_index is not None:
            t = truth_index.get((f.attribute, f.expression))
            if t is None:
                raise DataValidationError(
                    f"Ground truth sem achado para attribute={f.attribute}, expression={f.expression}."
                )
            if t.reference_group != f.reference_group:
                excluded += len(f.entries)
                continue
        if not f.entries:
            continue
        values = [
            e.validated if alpha is None else validate(e.observed, e.p, alpha)
            for e in f.entries
        ]
        per_attribute[f.attribute].append(float(np.mean(values)))
        included += len(values)

    if not per_attribute:
        value = math.nan
    else:
        value = float(np.mean([np.mean(cells) for cells in per_attribute.values()]))
    return AvgBiasResult(value=value, included_entries=included, excluded_nan=excluded, alpha=alpha)


def alpha_sweep(
    findings: Sequence[BiasFinding],
    alphas: Optional[Sequence[float]] = None,
    truth: Optional[Sequence[BiasFinding]] = None,
) -> AlphaSweep:
    """AvgBias(α) para cada α, reaproveitando os p-valores já calculados."""
    alphas = list(alphas) if alphas is not None else default_alphas()
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise DataValidationError(f"α fora de (0,1): {a}")
    curve = [avg_bias(findings, truth=truth, alpha=a) for a in alphas]
    logger.info(
        "Varredura de α | " + " ".join(f"{a:.2f}:{r.value * 100:.2f}%" for a, r in zip(alphas, curve))
    )
    return AlphaSweep(alphas=alphas, curve=curve)


def _vocabulary(findings: Sequence[BiasFinding]) -> set[tuple[str, str, frozenset[str]]]:
    return {(f.attribute, f.expression, frozenset(f.all_groups)) for f in findings}


def multi_run_compare(runs: Mapping[str, Sequence[BiasFinding]]) -> list[RunAvgBias]:
    """AvgBias por execução (ex: uma por arquitetura); vocabulários devem coincidir."""
    if not runs:
        raise DataValidationError("Nenhuma execução informada.")
    names = list(runs)
    reference = _vocabulary(runs[names[0]])
    for name in names[1:]:
        vocab = _vocabulary(runs[name])
        if vocab != reference:
            diff = sorted((a, e) for a, e, _ in vocab ^ reference)
            raise DataValidationError(
                f"Vocabulário inconsistente entre '{names[0]}' e '{name}': células divergentes {diff[:5]}"
            )
    return [RunAvgBias(run=name, result=avg_bias(runs[name])) for name in names]
