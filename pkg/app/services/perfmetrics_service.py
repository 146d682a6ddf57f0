"""
Serviço de métricas estratificadas de desempenho.

Fluxo para cada expressão e atributo sensível:
  1. Estratifica as amostras com classe verdadeira == expressão por grupo
  2. Calcula a métrica de cada estrato (registro _METRICS; hoje só TPR)
  3. Escolhe a referência s_max (maior TPR; empate → ordem do esquema)
  4. DEO contra cada grupo remanescente: TPR(ref) − TPR(k)

Política de estratos pequenos:
  - min_stratum_size = 1 (padrão): estrato vazio é erro
  - k > 1: grupos com n < k são descartados e registrados; expressão que
    fica com menos de 2 grupos é pulada e registrada
Amostras com rótulo de atributo ausente ou fora do esquema são excluídas e contadas.
"""

from typing import Callable, Sequence

import numpy as np

from app.core.exceptions import DataValidationError
from app.models.schemas import (
    AttributeSchema,
    DipFinding,
    ObservedEntry,
    PerformanceMetric,
    PredictionSet,
    StratumDrop,
    StratumOutcome,
)
from app.utils.logger import get_logger

logger = get_logger(__name__)


def _attribute_column(preds: PredictionSet, schema: AttributeSchema) -> tuple[str, ...]:
    if schema.name not in preds.attribute_labels:
        raise DataValidationError(
            f"Log de predições sem a coluna de atributo '{schema.name}' "
            f"(colunas: {list(preds.attribute_labels)})."
        )
    return preds.attribute_labels[schema.name]


def collect_strata(preds: PredictionSet, expression: str, schema: AttributeSchema) -> list[StratumOutcome]:
    """Um StratumOutcome por grupo do esquema (inclusive vazios), em ordem canônica."""
    if expression not in preds.class_vocabulary:
        raise DataValidationError(f"Expressão '{expression}' fora do vocabulário de classes.")
    column = _attribute_column(preds, schema)
    rows: dict[str, list[float]] = {g: [] for g in schema.groups}
    for truth, pred, group in zip(preds.true_class, preds.predicted_class, column):
        if truth == expression and group in rows:
            rows[group].append(1.0 if pred == truth else 0.0)

    strata = []
    for group, hits in rows.items():
        indicators = np.asarray(hits, dtype=np.float64)
        strata.append(
            StratumOutcome(
                expression=expression,
                group=group,
                n=indicators.size,
                correct=int(indicators.sum()),
                indicators=indicators,
            )
        )
    return strata


def stratify(preds: PredictionSet, expression: str, schema: AttributeSchema) -> list[StratumOutcome]:
    """D^ts_{e,S} = {D^ts_{e,s_1}, …, D^ts_{e,s_n}}; estrato vazio é erro."""
    strata = collect_strata(preds, expression, schema)
    empty = [s.group for s in strata if s.n == 0]
    if empty:
        raise DataValidationError(
            f"Estrato(s) vazio(s) para expression='{expression}', attribute='{schema.name}': {empty}"
        )
    return strata


def apply_min_stratum_size(
    strata: Sequence[StratumOutcome], attribute: str, min_size: int
) -> tuple[list[StratumOutcome], list[StratumDrop]]:
    """Descarta grupos com n < min_size. Retorna (mantidos, registros de descarte)."""
    kept = [s for s in strata if s.n >= min_size]
    drops = [
        StratumDrop(expression=s.expression, attribute=attribute, group=s.group, n=s.n,
                    reason=f"n < min_stratum_size ({min_size})")
        for s in strata
        if s.n < min_size
    ]
    for d in drops:
        logger.warning(f"Estrato descartado | expression={d.expression} | attribute={attribute} | group={d.group} | n={d.n}")
    return kept, drops


def count_excluded(preds: PredictionSet, schema: AttributeSchema) -> int:
    """Amostras sem rótulo do atributo (ou com rótulo fora do esquema)."""
    column = _attribute_column(preds, schema)
    known = set(schema.groups)
    return sum(1 for g in column if g not in known)


def tpr(s: StratumOutcome) -> float:
    if s.n < 1:
        raise DataValidationError(f"Estrato vazio ({s.expression}, {s.group}): TPR indefinida.")
    return s.correct / s.n


_METRICS: dict[PerformanceMetric, Callable[[StratumOutcome], float]] = {
    PerformanceMetric.TPR: tpr,
}


def metric(s: StratumOutcome, which: PerformanceMetric = PerformanceMetric.TPR) -> float:
    """M(D_{e,s}) para a métrica registrada em `which`."""
    return _METRICS[PerformanceMetric(which)](s)


def dip(m_j: float, m_k: float) -> float:
    """DiP = M(D_{e,s_j}) − M(D_{e,s_k})."""
    return m_j - m_k


def reference_group_perf(strata: Sequence[StratumOutcome]) -> str:
    """
    Grupo com maior TPR; empate → primeiro na ordem do esquema.
    Comparação por produto cruzado de inteiros para empates exatos (7/10 == 14/20).
    """
    if len(strata) < 2:
        raise DataValidationError("Seleção de referência exige pelo menos 2 estratos.")
    for s in strata:
        tpr(s)
    best = strata[0]
    for s in strata[1:]:
        if s.correct * best.n > best.correct * s.n:
            best = s
    return best.group


def dip_finding(
    strata: Sequence[StratumOutcome],
    attribute: str,
    which: PerformanceMetric = PerformanceMetric.TPR,
) -> DipFinding:
    ref_name = reference_group_perf(strata)
    ref = next(s for s in strata if s.group == ref_name)
    entries = [
        ObservedEntry(group=s.group, observed=dip(metric(ref, which), metric(s, which)))
        for s in strata
        if s.group != ref_name
    ]
    return DipFinding(
        expression=ref.expression, attribute=attribute, reference_group=ref_name, entries=entries
    )
