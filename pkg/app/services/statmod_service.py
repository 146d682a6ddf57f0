"""
Módulo estatístico plug-and-play: testes de permutação para DiA e DiP.

Para cada expressão e cada grupo remanescente s_k:
  1. V = valor observado contra a referência s_max (fixada ANTES do teste)
  2. Permuta os rótulos entre s_max e s_k mantendo os tamanhos dos grupos
  3. p = fração de permutações com V_b ≥ V (unilateral)
  4. Ṽ = V se p < α, senão 0

Caminhos de cálculo do p-valor:
  - Exato: se C(n1+n2, n1) ≤ exact_threshold, enumera todas as atribuições.
    Indicadores binários (DiP) usam a cauda hipergeométrica em aritmética inteira.
  - Monte Carlo: B relabelings uniformes sorteados de fluxos Philox com chave
    (seed, fonte, expressão, atributo, referência, grupo), em blocos cujo
    índice vai no contador. Indicadores binários sorteiam diretamente a contagem
    hipergeométrica de acertos no grupo de referência (mesma distribuição).

Redução para DiA: A(e, s) é linear em Σ ẑ_s, então sob qualquer relabeling
DiA = (mean(t_ref) − mean(t_k)) / 2 com t_i = ẑ_i · mean_unit_e. Apenas os
embeddings do probe são permutados; os da expressão ficam fixos.

Decisão técnica: sem correção de múltiplas comparações (o número de testes
vai no rodapé do relatório).
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import DataValidationError, StatisticalModuleError
from app.core.rng import block_generator, stream_key
from app.models.schemas import (
    AttributeSchema,
    BiasFinding,
    EmbeddingSet,
    Estimator,
    FindingSource,
    GroupSummary,
    NormalizedEmbeddingSet,
    PerformanceMetric,
    PermutationConfig,
    PredictionSet,
    StratumDrop,
    SuiteOutcome,
    TestMethod,
    TestResult,
)
from app.services import association_service as assoc
from app.services import perfmetrics_service as perf
from app.services.embedding_service import normalize, partition
from app.utils.logger import get_logger

logger = get_logger(__name__)
settings = get_settings()

# Tolerância do empate V_b ≥ V: absorve diferenças de arredondamento entre o
# valor observado (calculado pela tabela) e o mesmo relabeling recomputado aqui.
TIE_TOL = 1e-12

EXPRESSION_LABEL_KEY = "expression"


# =============================================================================
# PRIMITIVAS
# =============================================================================

def project_scalars(
    expr_summary: GroupSummary,
    group_ref: NormalizedEmbeddingSet,
    group_k: NormalizedEmbeddingSet,
) -> tuple[np.ndarray, np.ndarray]:
    """t_i = ẑ_i · mean_unit_e para cada membro do probe nos dois grupos."""
    for g in (group_ref, group_k):
        if g.dim != expr_summary.dim:
            raise DataValidationError(
                f"Dimensões incompatíveis: expressão tem {expr_summary.dim}, probe tem {g.dim}."
            )
    return group_ref.unit_vectors @ expr_summary.mean_unit, group_k.unit_vectors @ expr_summary.mean_unit


def validate(observed: float, p: float, alpha: float) -> float:
    """Ṽ = V se p < α (estrito), senão 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-valor fora de [0,1]: {p}")
    return observed if p < alpha else 0.0


def _is_binary(values: np.ndarray) -> bool:
    return bool(np.all((values == 0.0) | (values == 1.0)))


def _exact_binary_count(pooled: np.ndarray, n1: int, observed: float, scale: float) -> int:
    """Número de atribuições com estatística ≥ observado, via cauda hipergeométrica inteira."""
    n = pooled.size
    n2 = n - n1
    k = int(pooled.sum())
    count = 0
    for x in range(max(0, n1 - (n - k)), min(n1, k) + 1):
        stat = scale * (x / n1 - (k - x) / n2)
        if stat >= observed - TIE_TOL:
            count += math.comb(k, x) * math.comb(n - k, n1 - x)
    return count


def _exact_enumeration_count(pooled: np.ndarray, n1: int, observed: float, scale: float) -> int:
    """Enumera todas as atribuições do menor lado e conta estatísticas ≥ observado."""
    n = pooled.size
    n2 = n - n1
    small = min(n1, n2)
    total = math.comb(n, small)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), small)),
        dtype=np.intp,
        count=total * small,
    )
    sums = pooled[flat.reshape(total, small)].sum(axis=1)
    grand = pooled.sum()
    sum_a = sums if small == n1 else grand - sums
    stats = scale * (sum_a / n1 - (grand - sum_a) / n2)
    return int(np.count_nonzero(stats >= observed - TIE_TOL))


def _subset_sums(pooled: np.ndarray, n1: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    """
    Σ do grupo a para `rows` relabelings uniformes.

    Só o lado menor é sorteado: chaves uniformes por linha e argpartition nas m
    menores dão um subconjunto uniforme de tamanho m sem permutar o vetor inteiro.
    O resultado depende apenas de (pooled, n1, rows, estado do rng).
    """
    n = pooled.size
    m = min(n1, n - n1)
    keys = rng.random((rows, n))
    idx = np.argpartition(keys, m - 1, axis=1)[:, :m]
    sums = pooled[idx].sum(axis=1)
    return sums if m == n1 else pooled.sum() - sums


def _monte_carlo_count(
    pooled: np.ndarray, n1: int, observed: float, scale: float, b: int, key: int
) -> int:
    """Conta V_b ≥ V sobre B relabelings, bloco a bloco (bloco i usa o contador i)."""
    n = pooled.size
    n2 = n - n1
    grand = pooled.sum()
    batch = settings.PERMUTATION_BATCH_SIZE
    binary = _is_binary(pooled)
    ones = int(grand) if binary else 0
    count = 0

    for block, start in enumerate(range(0, b, batch)):
        rows = min(batch, b - start)
        rng = block_generator(key, block)
        if binary:
            sum_a = rng.hypergeometric(ngood=ones, nbad=n - ones, nsample=n1, size=rows).astype(np.float64)
        else:
            sum_a = _subset_sums(pooled, n1, rows, rng)
        stats = scale * (sum_a / n1 - (grand - sum_a) / n2)
        count += int(np.count_nonzero(stats >= observed - TIE_TOL))
    return count


def permutation_test(
    values_a: Sequence[float],
    values_b: Sequence[float],
    observed: float,
    cfg: PermutationConfig,
    stream_id: Sequence[str],
    scale: float = 1.0,
    group: str = "",
) -> TestResult:
    """
    Teste de permutação unilateral para scale·(mean(a) − mean(b)).

    values_a pertence ao grupo de referência. O observado vem da atribuição
    original com a mesma estatística (DiA: escala 1/2 sobre t_i; DiP: escala 1
    sobre indicadores 0/1 de acerto).
    """
    a = np.asarray(values_a, dtype=np.float64)
    b_vals = np.asarray(values_b, dtype=np.float64)
    if a.size == 0 or b_vals.size == 0:
        raise DataValidationError(f"Teste de permutação com lado vazio (stream={'/'.join(stream_id)}).")

    pooled = np.concatenate([a, b_vals])
    n1, n = a.size, pooled.size
    total = math.comb(n, n1)

    if total <= cfg.exact_threshold:
        if _is_binary(pooled):
            count = _exact_binary_count(pooled, n1, observed, scale)
        else:
            count = _exact_enumeration_count(pooled, n1, observed, scale)
        p = count / total
        method, b_used = TestMethod.EXACT, total
    else:
        key = stream_key(cfg.seed, *stream_id)
        count = _monte_carlo_count(pooled, n1, observed, scale, cfg.b, key)
        if cfg.estimator is Estimator.PLUS_ONE:
            p = (1 + count) / (1 + cfg.b)
        else:
            p = count / cfg.b
        method, b_used = TestMethod.MONTE_CARLO, cfg.b

    return TestResult(
        group=group,
        observed=observed,
        p=p,
        validated=validate(observed, p, cfg.alpha),
        method=method,
        b_used=b_used,
    )


# =============================================================================
# SUÍTES
# =============================================================================

def _run_tasks(tasks: list[Callable[[], TestResult]], threads: int) -> list[TestResult]:
    """Executa os testes; a ordem do resultado é sempre a ordem das tarefas."""
    workers = threads or settings.DEFAULT_THREADS or None
    if workers == 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _guard(label: str, fn: Callable[[], TestResult]) -> Callable[[], TestResult]:
    def wrapped() -> TestResult:
        try:
            return fn()
        except (DataValidationError, StatisticalModuleError):
            raise
        except Exception as exc:
            raise StatisticalModuleError(f"Falha no teste {label}: {type(exc).__name__}: {exc}") from exc
    return wrapped


class StatisticalModule:
    """
    Executa as suítes DiA (espaço de features) e DiP (desempenho).

    Testes de (expressão, par de grupos) distintos rodam em paralelo; cada um
    tem seu próprio fluxo aleatório, então o resultado não depende de `threads`.
    """

    def __init__(self, cfg: PermutationConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = threads

    # =========================================================================
    # DiA
    # =========================================================================

    def run_dia(
        self,
        test_embeddings: EmbeddingSet,
        probe_embeddings: EmbeddingSet,
        expr_vocab: Sequence[str],
        schema: AttributeSchema,
        expression_key: str = EXPRESSION_LABEL_KEY,
    ) -> SuiteOutcome:
        test_parts = partition(normalize(test_embeddings), expression_key, expr_vocab)
        probe_parts = partition(normalize(probe_embeddings), schema.name, schema)
        table = assoc.association_table(test_parts, probe_parts, schema.name)
        summaries = {e: assoc.group_summary(s, e) for e, s in test_parts.items()}

        plan, tasks = [], []
        for expression in expr_vocab:
            observed = assoc.dia_finding(table, expression)
            plan.append(observed)
            ref = observed.reference_group
            for entry in observed.entries:
                t_ref, t_k = project_scalars(summaries[expression], probe_parts[ref], probe_parts[entry.group])
                stream = ("dia", expression, schema.name, ref, entry.group)
                tasks.append(_guard(
                    "/".join(stream),
                    lambda t_ref=t_ref, t_k=t_k, obs=entry.observed, stream=stream, g=entry.group:
                        permutation_test(t_ref, t_k, obs, self.cfg, stream, scale=0.5, group=g),
                ))

        results = iter(_run_tasks(tasks, self.threads))
        findings = []
        for observed in plan:
            entries = [next(results) for _ in observed.entries]
            findings.append(BiasFinding(
                expression=observed.expression,
                attribute=schema.name,
                reference_group=observed.reference_group,
                source=FindingSource.DIA,
                entries=entries,
            ))
            self._log_finding(findings[-1])

        return SuiteOutcome(source=FindingSource.DIA, attribute=schema.name, findings=findings, tables=[table])

    # =========================================================================
    # DiP
    # =========================================================================

    def run_dip(
        self,
        predictions: PredictionSet,
        expr_vocab: Sequence[str],
        schema: AttributeSchema,
        min_stratum_size: int = 1,
        metric: PerformanceMetric = PerformanceMetric.TPR,
    ) -> SuiteOutcome:
        """
        DiP por expressão. Os relabelings permutam os indicadores de acerto, cuja
        diferença de médias é a diferença de TPR.
        """
        excluded = perf.count_excluded(predictions, schema)
        if excluded:
            logger.warning(f"Amostras sem rótulo válido excluídas | attribute={schema.name} | n={excluded}")

        plan, tasks, drops, all_strata = [], [], [], []
        for expression in expr_vocab:
            if min_stratum_size <= 1:
                strata = perf.stratify(predictions, expression, schema)
            else:
                strata, dropped = perf.apply_min_stratum_size(
                    perf.collect_strata(predictions, expression, schema), schema.name, min_stratum_size
                )
                drops.extend(dropped)
                if len(strata) < 2:
                    drops.append(StratumDrop(
                        expression=expression, attribute=schema.name,
                        reason="menos de 2 grupos após min_stratum_size; expressão pulada",
                    ))
                    logger.warning(f"Expressão pulada | expression={expression} | attribute={schema.name}")
                    continue
            all_strata.extend(strata)

            observed = perf.dip_finding(strata, schema.name, metric)
            plan.append(observed)
            by_group = {s.group: s for s in strata}
            ref = observed.reference_group
            for entry in observed.entries:
                stream = ("dip", expression, schema.name, ref, entry.group)
                tasks.append(_guard(
                    "/".join(stream),
                    lambda a=by_group[ref].indicators, b=by_group[entry.group].indicators,
                           obs=entry.observed, stream=stream, g=entry.group:
                        permutation_test(a, b, obs, self.cfg, stream, scale=1.0, group=g),
                ))

        results = iter(_run_tasks(tasks, self.threads))
        findings = []
        for observed in plan:
            entries = [next(results) for _ in observed.entries]
            findings.append(BiasFinding(
                expression=observed.expression,
                attribute=schema.name,
                reference_group=observed.reference_group,
                source=FindingSource.DIP,
                entries=entries,
            ))
            self._log_finding(findings[-1])

        return SuiteOutcome(
            source=FindingSource.DIP,
            attribute=schema.name,
            findings=findings,
            strata=all_strata,
            drops=drops,
            excluded_samples=excluded,
        )

    @staticmethod
    def _log_finding(f: BiasFinding) -> None:
        detail = " ".join(f"{e.group}:V={e.observed:.4f},p={e.p:.4f}" for e in f.entries)
        logger.info(
            f"Achado | source={f.source.value} | expression={f.expression} | "
            f"attribute={f.attribute} | ref={f.reference_group} | {detail}"
        )


def run_dia_suite(
    test_embeddings: EmbeddingSet,
    probe_embeddings: EmbeddingSet,
    expr_vocab: Sequence[str],
    schema: AttributeSchema,
    cfg: PermutationConfig,
    threads: int = 1,
) -> list[BiasFinding]:
    return StatisticalModule(cfg, threads).run_dia(test_embeddings, probe_embeddings, expr_vocab, schema).findings


def run_dip_suite(
    predictions: PredictionSet,
    expr_vocab: Sequence[str],
    schema: AttributeSchema,
    cfg: PermutationConfig,
    threads: int = 1,
    min_stratum_size: int = 1,
    metric: PerformanceMetric = PerformanceMetric.TPR,
) -> list[BiasFinding]:
    module = StatisticalModule(cfg, threads)
    return module.run_dip(predictions, expr_vocab, schema, min_stratum_size, metric).findings
