"""
Serviço de preparação de embeddings e logs de predição.

Responsável por:
  - Normalizar linhas (cos(z_e, z_s) vira produto interno de vetores unitários)
  - Particionar um conjunto por chave de rótulo segundo um esquema ordenado
  - Excluir ids (amostras ambíguas), agrupar idades em faixas e renomear categorias

Nenhuma E/S aqui: tudo opera sobre conjuntos já carregados e imutáveis.
"""

from collections import Counter
from typing import Mapping, Sequence, Union

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import DataValidationError
from app.models.schemas import AttributeSchema, EmbeddingSet, NormalizedEmbeddingSet, PredictionSet
from app.utils.logger import get_logger

logger = get_logger(__name__)
settings = get_settings()

GroupSpec = Union[AttributeSchema, Sequence[str]]


def _group_names(groups: GroupSpec) -> tuple[str, ...]:
    return groups.groups if isinstance(groups, AttributeSchema) else tuple(groups)


def normalize(emb: EmbeddingSet) -> NormalizedEmbeddingSet:
    """Divide cada linha pela sua norma L2; os vetores originais são mantidos."""
    if isinstance(emb, NormalizedEmbeddingSet):
        return emb
    norms = np.linalg.norm(emb.vectors, axis=1, keepdims=True)
    return NormalizedEmbeddingSet(
        ids=emb.ids,
        dim=emb.dim,
        vectors=emb.vectors,
        labels=emb.labels,
        unit_vectors=emb.vectors / norms,
    )


def partition(
    emb: NormalizedEmbeddingSet,
    label_key: str,
    groups: GroupSpec,
    strict: bool = True,
) -> dict[str, NormalizedEmbeddingSet]:
    """
    Partição disjunta de `emb` pelos valores de `label_key`, na ordem do esquema.

    strict=True: amostra com rótulo fora do esquema é erro (lista os rótulos).
    strict=False: essas amostras são descartadas e contadas no log.
    Grupo vazio é sempre erro.
    """
    names = _group_names(groups)
    if label_key not in emb.labels:
        raise DataValidationError(f"Chave de rótulo '{label_key}' ausente no conjunto.")
    values = emb.labels[label_key]

    known = set(names)
    unknown = sorted({v for v in values if v not in known})
    if unknown:
        if strict:
            raise DataValidationError(
                f"Rótulos fora do esquema '{label_key}': {unknown} (esquema: {list(names)})"
            )
        dropped = sum(1 for v in values if v not in known)
        logger.warning(f"Amostras fora do esquema descartadas | key={label_key} | n={dropped} | rótulos={unknown}")

    index: dict[str, list[int]] = {name: [] for name in names}
    for i, value in enumerate(values):
        if value in index:
            index[value].append(i)

    empty = [name for name, rows in index.items() if not rows]
    if empty:
        raise DataValidationError(f"Grupo(s) vazio(s) para '{label_key}': {empty}")

    parts = {name: emb.take(np.asarray(rows)) for name, rows in index.items()}
    counts = " ".join(f"{name}={len(rows)}" for name, rows in index.items())
    logger.info(f"Partição | key={label_key} | {counts}")
    return parts


def exclude_ids(emb: EmbeddingSet, excluded: frozenset[str]) -> EmbeddingSet:
    """Remove as amostras cujos ids estão na lista de exclusão."""
    keep = np.asarray([i for i, sample_id in enumerate(emb.ids) if sample_id not in excluded], dtype=np.intp)
    removed = emb.n - keep.size
    if removed:
        logger.info(f"Amostras excluídas por id | removidas={removed} | restantes={keep.size}")
        return emb.take(keep)
    return emb


def exclude_prediction_ids(preds: PredictionSet, excluded: frozenset[str]) -> PredictionSet:
    keep = [i for i, sample_id in enumerate(preds.ids) if sample_id not in excluded]
    removed = preds.n - len(keep)
    if removed:
        logger.info(f"Predições excluídas por id | removidas={removed} | restantes={len(keep)}")
        return preds.take(keep)
    return preds


def age_bin_labels(edges: Sequence[int]) -> tuple[str, ...]:
    """Nomes das faixas, ex: edges (4, 20, 40, 70) → 0-3, 4-19, 20-39, 40-69, 70+."""
    bounds = [0, *edges]
    names = [f"{lo}-{hi - 1}" for lo, hi in zip(bounds[:-1], bounds[1:])]
    names.append(f"{bounds[-1]}+")
    return tuple(names)


def _bin_values(values: Sequence[str], edges: Sequence[int], label_key: str) -> tuple[str, ...]:
    names = age_bin_labels(edges)
    out = []
    for value in values:
        if value == "":
            out.append("")
            continue
        try:
            age = float(value)
        except ValueError:
            raise DataValidationError(f"Idade não numérica em '{label_key}': '{value}'")
        if age < 0 or not np.isfinite(age):
            raise DataValidationError(f"Idade inválida em '{label_key}': '{value}'")
        out.append(names[int(np.searchsorted(edges, age, side="right"))])
    return tuple(out)


def bin_ages(emb: EmbeddingSet, label_key: str, edges: Sequence[int] | None = None) -> EmbeddingSet:
    """Converte idades numéricas em faixas etárias (padrão: 0-3, 4-19, 20-39, 40-69, 70+)."""
    edges = list(edges if edges is not None else settings.AGE_BIN_EDGES)
    if label_key not in emb.labels:
        raise DataValidationError(f"Chave de rótulo '{label_key}' ausente no conjunto.")
    labels = {**emb.labels, label_key: _bin_values(emb.labels[label_key], edges, label_key)}
    return emb.model_copy(update={"labels": labels})


def bin_prediction_ages(preds: PredictionSet, column: str, edges: Sequence[int] | None = None) -> PredictionSet:
    edges = list(edges if edges is not None else settings.AGE_BIN_EDGES)
    if column not in preds.attribute_labels:
        raise DataValidationError(f"Coluna de atributo '{column}' ausente no log de predições.")
    labels = {**preds.attribute_labels, column: _bin_values(preds.attribute_labels[column], edges, column)}
    return preds.model_copy(update={"attribute_labels": labels})


def relabel(emb: EmbeddingSet, label_key: str, mapping: Mapping[str, str]) -> EmbeddingSet:
    """Reagrupa categorias (ex: 'East Asian' → 'Asian'); valores sem mapeamento ficam iguais."""
    if label_key not in emb.labels:
        raise DataValidationError(f"Chave de rótulo '{label_key}' ausente no conjunto.")
    values = tuple(mapping.get(v, v) for v in emb.labels[label_key])
    changed = Counter(v for v in emb.labels[label_key] if v in mapping)
    logger.info(f"Rótulos renomeados | key={label_key} | {dict(changed)}")
    return emb.model_copy(update={"labels": {**emb.labels, label_key: values}})


def relabel_predictions(preds: PredictionSet, column: str, mapping: Mapping[str, str]) -> PredictionSet:
    if column not in preds.attribute_labels:
        raise DataValidationError(f"Coluna de atributo '{column}' ausente no log de predições.")
    values = tuple(mapping.get(v, v) for v in preds.attribute_labels[column])
    return preds.model_copy(update={"attribute_labels": {**preds.attribute_labels, column: values}})
