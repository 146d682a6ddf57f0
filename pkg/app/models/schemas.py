"""
Schemas Pydantic para todos os tipos de domínio da auditoria.

Tudo que entra (embeddings, logs de predição, configs) e tudo que sai
(achados, comparações, manifestos) passa por esses schemas.
Garante tipagem forte, validação automática e serialização JSON estável.

Decisão técnica: Pydantic v2, validadores via @field_validator/@model_validator.
Matrizes numéricas são numpy float64 (arbitrary_types_allowed) e ficam
somente-leitura após a construção: conjuntos carregados são imutáveis e podem
ser compartilhados entre threads.
Enums para campos de valor fixo (formato, estimador, método) evitam strings mágicas.
"""

import hashlib
import json
import math
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Tolerância para norma unitária após normalização
UNIT_NORM_TOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# =============================================================================
# ENUMS
# =============================================================================

class FileFormat(str, Enum):
    BINARY = "binary"
    CSV = "csv"


class Estimator(str, Enum):
    """Estimador do p-valor Monte Carlo."""
    PAPER = "paper"          # (1/B) Σ 1(V_b ≥ V)
    PLUS_ONE = "plus_one"    # (1 + Σ) / (1 + B)


class TestMethod(str, Enum):
    __test__ = False

    MONTE_CARLO = "monte_carlo"
    EXACT = "exact"


class FindingSource(str, Enum):
    DIA = "dia"
    DIP = "dip"


class PerformanceMetric(str, Enum):
    """Métrica M(·) da estratificação. Apenas TPR é suportada."""
    TPR = "tpr"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    MD = "md"


TIE_BREAK_RULE = "schema_order"
AVG_BIAS_NORMALIZATION = "per_attribute_n_minus_1"


# =============================================================================
# ESQUEMAS DE ATRIBUTO E CONJUNTOS DE DADOS
# =============================================================================

class AttributeSchema(BaseModel):
    """
    Atributo sensível S e seus grupos s_1…s_n.
    A ordem dos grupos é fixa e define o desempate em todos os argmax.
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    groups: tuple[str, ...]

    @field_validator("groups")
    @classmethod
    def unique_groups(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if len(v) < 2:
            raise ValueError("Um atributo precisa de pelo menos 2 grupos.")
        seen: set[str] = set()
        dupes = [g for g in v if g in seen or seen.add(g)]
        if dupes:
            raise ValueError(f"Grupos duplicados no esquema: {sorted(set(dupes))}")
        if any(not g for g in v):
            raise ValueError("Nome de grupo vazio no esquema.")
        return v

    def index(self, group: str) -> int:
        return self.groups.index(group)


class EmbeddingSet(BaseModel):
    """
    Coleção rotulada de vetores de dimensão fixa.
    Única representação do modelo congelado f no artefato.
    A ordem das linhas é a ordem canônica (a do arquivo).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ids: tuple[str, ...]
    dim: int = Field(..., gt=0)
    vectors: np.ndarray
    labels: dict[str, tuple[str, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_invariants(self) -> "EmbeddingSet":
        vecs = np.asarray(self.vectors, dtype=np.float64)
        n = len(self.ids)
        if vecs.ndim != 2 or vecs.shape != (n, self.dim):
            raise ValueError(
                f"Matriz com forma {vecs.shape}, esperado ({n}, {self.dim})."
            )
        finite = np.isfinite(vecs).all(axis=1)
        if not finite.all():
            bad = self.ids[int(np.argmin(finite))]
            raise ValueError(f"Valor não finito no vetor da amostra '{bad}'.")
        norms = np.linalg.norm(vecs, axis=1)
        if (norms == 0).any():
            bad = self.ids[int(np.argmax(norms == 0))]
            raise ValueError(f"Vetor de norma zero na amostra '{bad}'.")
        for key, values in self.labels.items():
            if len(values) != n:
                raise ValueError(f"Rótulo '{key}' tem {len(values)} valores para {n} amostras.")
            missing = [self.ids[i] for i, v in enumerate(values) if v == ""]
            if missing:
                raise ValueError(f"Rótulo '{key}' ausente nas amostras: {missing[:5]}")
        object.__setattr__(self, "vectors", _freeze(vecs.copy()))
        return self

    @property
    def n(self) -> int:
        return len(self.ids)

    def take(self, indices: np.ndarray) -> "EmbeddingSet":
        """Subconjunto pelas posições dadas (já validado; não revalida)."""
        idx = np.asarray(indices, dtype=np.intp)
        return EmbeddingSet.model_construct(
            ids=tuple(self.ids[i] for i in idx),
            dim=self.dim,
            vectors=_freeze(self.vectors[idx]),
            labels={k: tuple(v[i] for i in idx) for k, v in self.labels.items()},
        )


class NormalizedEmbeddingSet(EmbeddingSet):
    """EmbeddingSet + linhas L2-normalizadas (cos vira produto interno)."""

    unit_vectors: np.ndarray

    @model_validator(mode="after")
    def check_unit(self) -> "NormalizedEmbeddingSet":
        unit = np.asarray(self.unit_vectors, dtype=np.float64)
        if unit.shape != self.vectors.shape:
            raise ValueError("unit_vectors com forma diferente de vectors.")
        norms = np.linalg.norm(unit, axis=1)
        if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL):
            raise ValueError("unit_vectors contém linha com norma diferente de 1.")
        object.__setattr__(self, "unit_vectors", _freeze(unit.copy()))
        return self

    def take(self, indices: np.ndarray) -> "NormalizedEmbeddingSet":
        idx = np.asarray(indices, dtype=np.intp)
        return NormalizedEmbeddingSet.model_construct(
            ids=tuple(self.ids[i] for i in idx),
            dim=self.dim,
            vectors=_freeze(self.vectors[idx]),
            labels={k: tuple(v[i] for i in idx) for k, v in self.labels.items()},
            unit_vectors=_freeze(self.unit_vectors[idx]),
        )


class PredictionSet(BaseModel):
    """
    Log de predições: (id, classe verdadeira y_i, classe predita, grupos s_i).
    Rótulo de atributo vazio ("") significa anotação ausente.
    """
    model_config = ConfigDict(frozen=True)

    ids: tuple[str, ...]
    true_class: tuple[str, ...]
    predicted_class: tuple[str, ...]
    class_vocabulary: tuple[str, ...]
    attribute_labels: dict[str, tuple[str, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_invariants(self) -> "PredictionSet":
        n = len(self.ids)
        if len(self.true_class) != n or len(self.predicted_class) != n:
            raise ValueError("true_class/predicted_class com tamanho diferente de ids.")
        seen: set[str] = set()
        for sample_id in self.ids:
            if sample_id in seen:
                raise ValueError(f"Id duplicado no log de predições: '{sample_id}'.")
            seen.add(sample_id)
        vocab = set(self.class_vocabulary)
        for column, values in (("true", self.true_class), ("pred", self.predicted_class)):
            for sample_id, value in zip(self.ids, values):
                if value not in vocab:
                    raise ValueError(
                        f"Classe desconhecida '{value}' na coluna {column} (id='{sample_id}')."
                    )
        for key, values in self.attribute_labels.items():
            if len(values) != n:
                raise ValueError(f"Coluna de atributo '{key}' com tamanho incorreto.")
        return self

    @property
    def n(self) -> int:
        return len(self.ids)

    def take(self, indices: list[int]) -> "PredictionSet":
        return PredictionSet.model_construct(
            ids=tuple(self.ids[i] for i in indices),
            true_class=tuple(self.true_class[i] for i in indices),
            predicted_class=tuple(self.predicted_class[i] for i in indices),
            class_vocabulary=self.class_vocabulary,
            attribute_labels={k: tuple(v[i] for i in indices) for k, v in self.attribute_labels.items()},
        )


# =============================================================================
# ASSOCIAÇÃO (espaço de features)
# =============================================================================

class GroupSummary(BaseModel):
    """Média dos vetores unitários de um grupo: portador algébrico de Σ ẑ."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    group: str
    count: int = Field(..., gt=0)
    mean_unit: np.ndarray

    @model_validator(mode="after")
    def check_norm(self) -> "GroupSummary":
        norm = float(np.linalg.norm(self.mean_unit))
        if norm > 1.0 + 1e-12:
            raise ValueError(f"mean_unit do grupo '{self.group}' com norma {norm} > 1.")
        return self

    @property
    def dim(self) -> int:
        return int(self.mean_unit.shape[0])


class AssociationTable(BaseModel):
    """Matriz A(e, s_j) em [0,1]: expressões × grupos de um atributo."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    attribute: str
    expressions: tuple[str, ...]
    groups: tuple[str, ...]
    values: np.ndarray
    counts_e: tuple[int, ...]
    counts_s: tuple[int, ...]

    @model_validator(mode="after")
    def check_shape(self) -> "AssociationTable":
        if self.values.shape != (len(self.expressions), len(self.groups)):
            raise ValueError("Tabela de associação com forma inconsistente.")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValueError("Valor de associação fora de [0,1].")
        _freeze(self.values)
        return self

    def value(self, expression: str, group: str) -> float:
        try:
            return float(self.values[self.expressions.index(expression), self.groups.index(group)])
        except ValueError as exc:
            raise KeyError(f"Célula desconhecida ({expression}, {group})") from exc

    def row(self, expression: str) -> np.ndarray:
        if expression not in self.expressions:
            raise KeyError(f"Expressão desconhecida: '{expression}'")
        return self.values[self.expressions.index(expression)]


class ObservedEntry(BaseModel):
    group: str
    observed: float


class DiaFinding(BaseModel):
    """DiA^e_(max,k) observados antes do teste estatístico."""
    expression: str
    attribute: str
    reference_group: str
    entries: list[ObservedEntry]

    @model_validator(mode="after")
    def non_negative(self) -> "DiaFinding":
        if any(e.observed < 0 for e in self.entries):
            raise ValueError("DiA observado negativo: a referência deve ser o argmax.")
        return self


# =============================================================================
# DESEMPENHO (log de predições)
# =============================================================================

class StratumOutcome(BaseModel):
    """Resultado de um estrato D^ts_{e,s_j}: contagem, acertos e indicadores 0/1."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    expression: str
    group: str
    n: int = Field(..., ge=0)
    correct: int = Field(..., ge=0)
    indicators: np.ndarray

    @model_validator(mode="after")
    def check_counts(self) -> "StratumOutcome":
        if self.correct > self.n:
            raise ValueError("correct > n no estrato.")
        if self.indicators.shape != (self.n,):
            raise ValueError("Vetor de indicadores com tamanho diferente de n.")
        _freeze(self.indicators)
        return self


class StratumDrop(BaseModel):
    """Registro de grupo (ou expressão) descartado pela política de tamanho mínimo."""
    expression: str
    attribute: str
    group: Optional[str] = None
    n: int = 0
    reason: str


class DipFinding(BaseModel):
    """DEO^e_(max,k) observados (diferenças de TPR contra a referência)."""
    expression: str
    attribute: str
    reference_group: str
    entries: list[ObservedEntry]

    @model_validator(mode="after")
    def in_range(self) -> "DipFinding":
        if any(not (0.0 <= e.observed <= 1.0) for e in self.entries):
            raise ValueError("DiP observado fora de [0,1].")
        return self


# =============================================================================
# MÓDULO ESTATÍSTICO
# =============================================================================

class PermutationConfig(BaseModel):
    """Parâmetros do teste de permutação (B, α, seed mestre, limiar exato, estimador)."""
    model_config = ConfigDict(frozen=True)

    b: int = Field(10000, ge=1, description="Número de permutações B")
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    seed: int = Field(..., ge=0, lt=2**64)
    exact_threshold: int = Field(100000, ge=0)
    estimator: Estimator = Estimator.PAPER


class TestResult(BaseModel):
    """Resultado de um teste para um grupo remanescente s_k."""
    __test__ = False

    group: str
    observed: float
    p: float = Field(..., ge=0.0, le=1.0)
    validated: float
    method: TestMethod
    b_used: int = Field(..., ge=1)

    @model_validator(mode="after")
    def validated_rule(self) -> "TestResult":
        if self.validated != 0.0 and self.validated != self.observed:
            raise ValueError("validated deve ser 0 ou igual a observed.")
        return self


class BiasFinding(BaseModel):
    """Achado de viés por (expressão, atributo) com n−1 testes contra a referência."""
    expression: str
    attribute: str
    reference_group: str
    source: FindingSource
    entries: list[TestResult]

    @model_validator(mode="after")
    def reference_not_in_entries(self) -> "BiasFinding":
        groups = [e.group for e in self.entries]
        if self.reference_group in groups:
            raise ValueError("O grupo de referência não pode aparecer entre os remanescentes.")
        if len(set(groups)) != len(groups):
            raise ValueError(f"Grupos repetidos no achado ({self.expression}, {self.attribute}).")
        return self

    @property
    def all_groups(self) -> set[str]:
        return {self.reference_group, *(e.group for e in self.entries)}

    def entry(self, group: str) -> TestResult:
        for e in self.entries:
            if e.group == group:
                return e
        raise KeyError(group)


class SuiteOutcome(BaseModel):
    """Saída completa de uma suíte: achados + artefatos auxiliares para o relatório."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    source: FindingSource
    attribute: str
    findings: list[BiasFinding]
    tables: list[AssociationTable] = Field(default_factory=list)
    strata: list[StratumOutcome] = Field(default_factory=list)
    drops: list[StratumDrop] = Field(default_factory=list)
    excluded_samples: int = 0

    @property
    def tests_performed(self) -> int:
        return sum(len(f.entries) for f in self.findings)


class FindingsDocument(BaseModel):
    """Arquivo de achados: referencia o manifesto e registra decisões de execução."""
    manifest_digest: str
    metadata: dict[str, Any] = Field(default_factory=dict)
    findings: list[BiasFinding]


# =============================================================================
# AVALIAÇÃO / COMPARAÇÃO
# =============================================================================

class ComparisonRow(BaseModel):
    """Distância L1 de um método contra o ground truth para uma expressão."""
    method: str = ""
    attribute: str
    expression: str
    l1: float
    reference_match: bool

    @model_validator(mode="after")
    def nan_iff_mismatch(self) -> "ComparisonRow":
        if math.isnan(self.l1) == self.reference_match:
            raise ValueError("l1 deve ser NaN se e somente se as referências diferirem.")
        return self


class AvgBiasResult(BaseModel):
    value: float
    included_entries: int
    excluded_nan: int
    alpha: Optional[float] = None
    normalization: str = AVG_BIAS_NORMALIZATION


class AlphaSweep(BaseModel):
    alphas: list[float]
    curve: list[AvgBiasResult]


class RunAvgBias(BaseModel):
    run: str
    result: AvgBiasResult


# =============================================================================
# CENÁRIOS SINTÉTICOS
# =============================================================================

class ScenarioSpec(BaseModel):
    """
    Cenário com viés plantado: membros do grupo `tilted_group` no probe
    inclinam-se em direção à âncora de `target_expression`.
    """
    dim: int = Field(32, ge=2)
    expressions: tuple[str, ...]
    groups: AttributeSchema
    target_expression: str
    tilted_group: str
    tilt: float = Field(1.0, ge=0.0)
    expression_size: int = Field(200, ge=1)
    group_size: int = Field(500, ge=1)
    noise_scale: float = Field(1.0, gt=0.0)
    base_accuracy: float = Field(0.7, ge=0.0, le=1.0)
    accuracy_gap: float = Field(0.2, ge=0.0, le=1.0)
    seed: int = Field(..., ge=0, lt=2**64)
    expression_anchors: Optional[list[list[float]]] = None
    group_anchors: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def check_refs(self) -> "ScenarioSpec":
        if self.target_expression not in self.expressions:
            raise ValueError(f"target_expression '{self.target_expression}' fora do vocabulário.")
        if self.tilted_group not in self.groups.groups:
            raise ValueError(f"tilted_group '{self.tilted_group}' fora do esquema.")
        if self.base_accuracy + self.accuracy_gap > 1.0:
            raise ValueError("base_accuracy + accuracy_gap deve ser ≤ 1.")
        for name, anchors, count in (
            ("expression_anchors", self.expression_anchors, len(self.expressions)),
            ("group_anchors", self.group_anchors, len(self.groups.groups)),
        ):
            if anchors is None:
                continue
            arr = np.asarray(anchors, dtype=np.float64)
            if arr.shape != (count, self.dim):
                raise ValueError(f"{name} deve ter forma ({count}, {self.dim}).")
            if not np.allclose(np.linalg.norm(arr, axis=1), 1.0, atol=1e-9):
                raise ValueError(f"{name} deve conter vetores unitários.")
        return self


class NullSpec(BaseModel):
    """Cenário nulo: todos os grupos vêm da mesma distribuição."""
    dim: int = Field(32, ge=2)
    expressions: tuple[str, ...] = ("neutral", "happiness")
    groups: AttributeSchema
    expression_size: int = Field(200, ge=1)
    group_size: int = Field(200, ge=1)
    noise_scale: float = Field(1.0, gt=0.0)
    accuracy: float = Field(0.7, ge=0.0, le=1.0)
    seed: int = Field(..., ge=0, lt=2**64)


# =============================================================================
# MANIFESTO DE EXECUÇÃO
# =============================================================================

# Campos que variam entre reexecuções idênticas e ficam fora do digest
_VOLATILE_MANIFEST_FIELDS = {"timestamp", "threads"}


class RunManifest(BaseModel):
    """
    Registro completo de uma execução. O digest cobre tudo menos timestamp e
    threads, para que arquivos de resultado sejam idênticos byte a byte entre
    reexecuções e entre diferentes números de workers.
    """
    tool: str
    version: str
    command: str
    config: dict[str, Any]
    schemas: dict[str, list[str]] = Field(default_factory=dict)
    vocabularies: dict[str, list[str]] = Field(default_factory=dict)
    inputs: dict[str, str] = Field(default_factory=dict)
    tie_break: str = TIE_BREAK_RULE
    estimator: Optional[str] = None
    timestamp: str
    threads: int = 1

    @property
    def digest(self) -> str:
        payload = self.model_dump(mode="json", exclude=_VOLATILE_MANIFEST_FIELDS)
        raw = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()
