"""
Serviço de associação no espaço de features.

A(e, s_j) = (1 / (2|Z_s||Z_e|)) ΣΣ (cos(z_e, z_s) + 1)

Como Σ_pares cos = (Σ ẑ_e)·(Σ ẑ_s), a associação se reduz a
A = (mean_unit_e · mean_unit_s) / 2 + 1/2, em O((n+m)d) em vez de O(nmd).
O laço duplo literal fica disponível como oráculo (association_naive).

Decisão técnica:
- Soma das linhas em ordem fixa (ordem do arquivo, soma pairwise do numpy sobre
  memória contígua) para resultados estáveis bit a bit entre execuções
- Desempate do argmax pela ordem declarada no esquema
- A associação usa os rótulos verdadeiros de expressão do conjunto de teste
"""

from typing import Mapping

import numpy as np

from app.core.exceptions import DataValidationError
from app.models.schemas import (
    AssociationTable,
    DiaFinding,
    EmbeddingSet,
    GroupSummary,
    NormalizedEmbeddingSet,
    ObservedEntry,
)
from app.utils.logger import get_logger

logger = get_logger(__name__)


def _unit_rows(emb: EmbeddingSet) -> np.ndarray:
    if isinstance(emb, NormalizedEmbeddingSet):
        return emb.unit_vectors
    return emb.vectors / np.linalg.norm(emb.vectors, axis=1, keepdims=True)


def group_summary(g: NormalizedEmbeddingSet, group: str = "") -> GroupSummary:
    """mean_unit = (1/|g|) Σ ẑ, acumulado em ordem fixa."""
    if g.n == 0:
        raise DataValidationError(f"Grupo vazio: '{group}'.")
    # Transposta contígua: a redução corre sobre memória contígua (soma pairwise)
    total = np.ascontiguousarray(g.unit_vectors.T).sum(axis=1)
    return GroupSummary(group=group, count=g.n, mean_unit=total / g.n)


def association(expr: GroupSummary, grp: GroupSummary) -> float:
    """A(e, s_j) pela forma fatorada; resultado em [0, 1]."""
    if expr.dim != grp.dim:
        raise DataValidationError(
            f"Dimensões incompatíveis: '{expr.group}' tem {expr.dim}, '{grp.group}' tem {grp.dim}."
        )
    value = float(np.dot(expr.mean_unit, grp.mean_unit)) / 2.0 + 0.5
    return min(1.0, max(0.0, value))


def association_naive(expr_set: EmbeddingSet, grp_set: EmbeddingSet) -> float:
    """
    Avaliação literal O(n·m·d): cosseno de cada par a partir dos vetores brutos.
    Usado apenas como oráculo da forma fatorada.
    """
    if expr_set.n == 0 or grp_set.n == 0:
        raise DataValidationError("association_naive exige conjuntos não vazios.")
    if expr_set.dim != grp_set.dim:
        raise DataValidationError("Dimensões incompatíveis entre os conjuntos.")
    x, y = expr_set.vectors, grp_set.vectors
    dots = x @ y.T
    norms = np.outer(np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1))
    cos = np.clip(dots / norms, -1.0, 1.0)
    return float((cos + 1.0).sum() / (2.0 * expr_set.n * grp_set.n))


def association_table(
    test_parts: Mapping[str, NormalizedEmbeddingSet],
    probe_parts: Mapping[str, NormalizedEmbeddingSet],
    attribute: str,
) -> AssociationTable:
    """Uma célula A(e, s_j) por (expressão, grupo); ordem das chaves = ordem do esquema."""
    expr_summaries = {e: group_summary(s, e) for e, s in test_parts.items()}
    grp_summaries = {g: group_summary(s, g) for g, s in probe_parts.items()}

    values = np.empty((len(expr_summaries), len(grp_summaries)), dtype=np.float64)
    for i, es in enumerate(expr_summaries.values()):
        for j, gs in enumerate(grp_summaries.values()):
            values[i, j] = association(es, gs)

    table = AssociationTable(
        attribute=attribute,
        expressions=tuple(expr_summaries),
        groups=tuple(grp_summaries),
        values=values,
        counts_e=tuple(s.count for s in expr_summaries.values()),
        counts_s=tuple(s.count for s in grp_summaries.values()),
    )
    logger.info(
        f"Tabela de associação | attribute={attribute} | "
        f"células={values.size} | min={values.min():.4f} | max={values.max():.4f}"
    )
    return table


def dia(table: AssociationTable, expression: str, group_j: str, group_k: str) -> float:
    """DiA^e_(j,k) = A(e, s_j) − A(e, s_k). Antissimétrica; zero exato para j = k."""
    if group_j == group_k:
        table.value(expression, group_j)
        return 0.0
    return table.value(expression, group_j) - table.value(expression, group_k)


def reference_group_assoc(table: AssociationTable, expression: str) -> str:
    """Grupo mais associado à expressão; empate → primeiro na ordem do esquema."""
    return table.groups[int(np.argmax(table.row(expression)))]


def dia_finding(table: AssociationTable, expression: str) -> DiaFinding:
    """Referência (argmax) e DiA observado contra cada grupo remanescente."""
    ref = reference_group_assoc(table, expression)
    entries = [
        ObservedEntry(group=g, observed=dia(table, expression, ref, g))
        for g in table.groups
        if g != ref
    ]
    return DiaFinding(expression=expression, attribute=table.attribute, reference_group=ref, entries=entries)


def ieat_differential(
    x: EmbeddingSet, y: EmbeddingSet, a: EmbeddingSet, b: EmbeddingSet
) -> float:
    """
    Estatística diferencial do iEAT com cosseno bruto (sem o mapeamento (cos+1)/2):

        s(w, A, B) = mean_a cos(w, a) − mean_b cos(w, b)
        s(X, Y, A, B) = Σ_x s(x, A, B) − Σ_y s(y, A, B)
    """
    for name, s in (("X", x), ("Y", y), ("A", a), ("B", b)):
        if s.n == 0:
            raise DataValidationError(f"Conjunto {name} vazio.")
    ux, uy, ua, ub = (_unit_rows(s) for s in (x, y, a, b))

    def s_w(w: np.ndarray) -> np.ndarray:
        return (w @ ua.T).mean(axis=1) - (w @ ub.T).mean(axis=1)

    return float(s_w(ux).sum() - s_w(uy).sum())
