"""
Gerador de cenários sintéticos com viés plantado (ou nulo).

Usado para calibração (cenário nulo: α dos testes rejeita ≈ α das vezes)
e poder estatístico (cenário com viés: o grupo inclinado vira referência).

Geometria:
  - Âncoras unitárias ortonormalizadas (cosseno ≈ 0 entre conceitos)
  - Ruído gaussiano isotrópico com desvio noise_scale/√dim por componente,
    de modo que a norma do ruído fica ≈ noise_scale
  - Probe do grupo inclinado: âncora do grupo + tilt·âncora da expressão alvo + ruído
  - Predições com probabilidade de acerto dependente do grupo (caminho DiP)

A normalização fica para a ingestão: os conjuntos gerados passam exatamente
pelo mesmo código que dados reais.
"""

from typing import Optional

import numpy as np

from app.core.rng import scenario_generator
from app.models.schemas import AttributeSchema, EmbeddingSet, NullSpec, PredictionSet, ScenarioSpec
from app.services.statmod_service import EXPRESSION_LABEL_KEY
from app.utils.logger import get_logger

logger = get_logger(__name__)

DEMO_EXPRESSIONS = ("neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear")
DEMO_SCHEMA = AttributeSchema(name="gender", groups=("F", "M"))


def _random_anchors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """`count` direções unitárias; ortonormais quando count ≤ dim."""
    raw = rng.standard_normal((dim, count))
    if count <= dim:
        q, r = np.linalg.qr(raw)
        # Fixa o sinal de cada coluna (QR é único a menos de sinal)
        q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
        return np.ascontiguousarray(q.T)
    return (raw / np.linalg.norm(raw, axis=0)).T


def scenario_anchors(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """(âncoras de expressão, âncoras de grupo), explícitas ou sorteadas conjuntamente."""
    n_e, n_g = len(spec.expressions), len(spec.groups.groups)
    if spec.expression_anchors is not None and spec.group_anchors is not None:
        return np.asarray(spec.expression_anchors, float), np.asarray(spec.group_anchors, float)
    drawn = _random_anchors(scenario_generator(spec.seed, "anchors"), n_e + n_g, spec.dim)
    expr = np.asarray(spec.expression_anchors, float) if spec.expression_anchors is not None else drawn[:n_e]
    grp = np.asarray(spec.group_anchors, float) if spec.group_anchors is not None else drawn[n_e:]
    return expr, grp


def anchor_metadata(spec: ScenarioSpec) -> dict:
    """Cossenos entre todas as âncoras, registrados junto aos arquivos gerados."""
    expr, grp = scenario_anchors(spec)
    names = [f"expression:{e}" for e in spec.expressions] + [f"group:{g}" for g in spec.groups.groups]
    anchors = np.vstack([expr, grp])
    cos = anchors @ anchors.T
    return {
        "anchors": names,
        "pairwise_cosines": [[round(float(c), 12) for c in row] for row in cos],
    }


def _noise(rng: np.random.Generator, rows: int, dim: int, scale: float) -> np.ndarray:
    return rng.standard_normal((rows, dim)) * (scale / np.sqrt(dim))


def _predictions(
    rng: np.random.Generator,
    ids: list[str],
    truths: list[str],
    expressions: tuple[str, ...],
    attribute: str,
    groups: tuple[str, ...],
    accuracy: np.ndarray,
) -> PredictionSet:
    """Grupo atribuído em rodízio; acerto ~ Bernoulli(accuracy[i]); erro → outra classe uniforme."""
    n = len(ids)
    group_labels = tuple(groups[i % len(groups)] for i in range(n))
    hit = rng.random(n) < accuracy
    offset = rng.integers(1, len(expressions), size=n)
    truth_idx = np.asarray([expressions.index(t) for t in truths])
    pred_idx = np.where(hit, truth_idx, (truth_idx + offset) % len(expressions))
    return PredictionSet(
        ids=tuple(ids),
        true_class=tuple(truths),
        predicted_class=tuple(expressions[i] for i in pred_idx),
        class_vocabulary=expressions,
        attribute_labels={attribute: group_labels},
    )


def _test_set(
    rng: np.random.Generator, expressions: tuple[str, ...], anchors: np.ndarray, size: int, noise: float
) -> tuple[EmbeddingSet, list[str], list[str]]:
    dim = anchors.shape[1]
    ids, truths, blocks = [], [], []
    for e, anchor in zip(expressions, anchors):
        blocks.append(anchor + _noise(rng, size, dim, noise))
        ids.extend(f"test_{e}_{i:05d}" for i in range(size))
        truths.extend([e] * size)
    emb = EmbeddingSet(ids=tuple(ids), dim=dim, vectors=np.vstack(blocks),
                       labels={EXPRESSION_LABEL_KEY: tuple(truths)})
    return emb, ids, truths


def _probe_set(
    rng: np.random.Generator, attribute: str, groups: tuple[str, ...], centers: np.ndarray, size: int, noise: float
) -> EmbeddingSet:
    dim = centers.shape[1]
    ids, labels, blocks = [], [], []
    for g, center in zip(groups, centers):
        blocks.append(center + _noise(rng, size, dim, noise))
        ids.extend(f"probe_{g}_{i:05d}" for i in range(size))
        labels.extend([g] * size)
    return EmbeddingSet(ids=tuple(ids), dim=dim, vectors=np.vstack(blocks), labels={attribute: tuple(labels)})


def gen_biased(spec: ScenarioSpec) -> tuple[EmbeddingSet, EmbeddingSet, PredictionSet]:
    """Cenário com viés plantado em `tilted_group` para `target_expression` (DiA e DiP)."""
    if len(spec.expressions) < 2:
        raise ValueError("Cenário sintético exige pelo menos 2 expressões.")
    expr_anchors, group_anchors = scenario_anchors(spec)
    target = expr_anchors[spec.expressions.index(spec.target_expression)]
    tilted = spec.groups.index(spec.tilted_group)

    centers = group_anchors.copy()
    centers[tilted] = centers[tilted] + spec.tilt * target

    rng = scenario_generator(spec.seed, "biased")
    test, ids, truths = _test_set(rng, spec.expressions, expr_anchors, spec.expression_size, spec.noise_scale)
    probe = _probe_set(rng, spec.groups.name, spec.groups.groups, centers, spec.group_size, spec.noise_scale)

    groups = spec.groups.groups
    accuracy = np.full(len(ids), spec.base_accuracy)
    for i, truth in enumerate(truths):
        if truth == spec.target_expression and groups[i % len(groups)] == spec.tilted_group:
            accuracy[i] += spec.accuracy_gap
    preds = _predictions(rng, ids, truths, spec.expressions, spec.groups.name, groups, accuracy)

    logger.info(
        f"Cenário com viés gerado | seed={spec.seed} | target={spec.target_expression} | "
        f"tilted={spec.tilted_group} | tilt={spec.tilt} | dim={spec.dim}"
    )
    return test, probe, preds


def gen_null(spec: NullSpec) -> tuple[EmbeddingSet, EmbeddingSet, PredictionSet]:
    """Cenário nulo: grupos trocáveis (mesmo centro, mesmo ruído, mesma acurácia)."""
    if len(spec.expressions) < 2:
        raise ValueError("Cenário sintético exige pelo menos 2 expressões.")
    anchors = _random_anchors(scenario_generator(spec.seed, "anchors"), len(spec.expressions) + 1, spec.dim)
    expr_anchors, shared_center = anchors[:-1], anchors[-1]

    rng = scenario_generator(spec.seed, "null")
    test, ids, truths = _test_set(rng, spec.expressions, expr_anchors, spec.expression_size, spec.noise_scale)
    centers = np.tile(shared_center, (len(spec.groups.groups), 1))
    probe = _probe_set(rng, spec.groups.name, spec.groups.groups, centers, spec.group_size, spec.noise_scale)
    preds = _predictions(
        rng, ids, truths, spec.expressions, spec.groups.name, spec.groups.groups,
        np.full(len(ids), spec.accuracy),
    )
    logger.info(f"Cenário nulo gerado | seed={spec.seed} | dim={spec.dim} | grupos={list(spec.groups.groups)}")
    return test, probe, preds


def demo_spec(seed: int, schema: Optional[AttributeSchema] = None) -> ScenarioSpec:
    """
    Cenário de demonstração documentado: 7 expressões, gênero F/M, raiva inclinada
    para o último grupo do esquema. É a base de `synth`; as flags sobrescrevem campos.
    """
    schema = schema or DEMO_SCHEMA
    return ScenarioSpec(
        dim=32,
        expressions=DEMO_EXPRESSIONS,
        groups=schema,
        target_expression="anger",
        tilted_group=schema.groups[-1],
        tilt=1.0,
        expression_size=200,
        group_size=500,
        noise_scale=1.0,
        base_accuracy=0.7,
        accuracy_gap=0.2,
        seed=seed,
    )
