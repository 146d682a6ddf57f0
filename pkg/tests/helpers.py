"""Construtores de dados pequenos usados em vários módulos de teste."""

from typing import Optional, Sequence

import numpy as np

from app.models.schemas import (
    BiasFinding,
    EmbeddingSet,
    FindingSource,
    PredictionSet,
    TestMethod,
    TestResult,
)

EXPRESSIONS_7 = ("neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear")


def unit(i: int, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


def make_embeddings(
    rows: Sequence[Sequence[float]] | np.ndarray,
    key: str = "expression",
    labels: Optional[Sequence[str]] = None,
    prefix: str = "s",
) -> EmbeddingSet:
    vectors = np.asarray(rows, dtype=np.float64)
    n = vectors.shape[0]
    return EmbeddingSet(
        ids=tuple(f"{prefix}{i}" for i in range(n)),
        dim=vectors.shape[1],
        vectors=vectors,
        labels={key: tuple(labels)} if labels is not None else {},
    )


def make_predictions(
    rows: Sequence[tuple[str, str, str]],
    vocabulary: Sequence[str] = EXPRESSIONS_7,
    attribute: str = "gender",
) -> PredictionSet:
    """rows: (true, pred, group)."""
    return PredictionSet(
        ids=tuple(f"img_{i}" for i in range(len(rows))),
        true_class=tuple(r[0] for r in rows),
        predicted_class=tuple(r[1] for r in rows),
        class_vocabulary=tuple(vocabulary),
        attribute_labels={attribute: tuple(r[2] for r in rows)},
    )


def result(group: str, observed: float, p: float = 0.01, alpha: float = 0.05) -> TestResult:
    return TestResult(
        group=group,
        observed=observed,
        p=p,
        validated=observed if p < alpha else 0.0,
        method=TestMethod.MONTE_CARLO,
        b_used=10000,
    )


def finding(
    expression: str,
    reference: str,
    entries: Sequence[TestResult],
    attribute: str = "gender",
    source: FindingSource = FindingSource.DIA,
) -> BiasFinding:
    return BiasFinding(
        expression=expression,
        attribute=attribute,
        reference_group=reference,
        source=source,
        entries=list(entries),
    )
