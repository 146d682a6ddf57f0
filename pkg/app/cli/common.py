"""
Utilitários compartilhados pelos comandos da CLI.

- Registro de flags comuns (permutação, ingestão, saída)
- Montagem do PermutationConfig e do RunManifest
- Pré-processamento de entradas (exclusão de ids, faixas etárias, reagrupamento)
"""

import argparse
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from app.core.config import get_settings
from app.core.exceptions import DataValidationError
from app.models.schemas import (
    AttributeSchema,
    EmbeddingSet,
    Estimator,
    FileFormat,
    FindingsDocument,
    OutputFormat,
    PermutationConfig,
    PredictionSet,
    RunManifest,
)
from app.repositories.embeddings_repository import DatasetRepository
from app.repositories.findings_repository import FindingsRepository
from app.services import embedding_service
from app.services.report_service import render_report
from app.utils.logger import get_logger

logger = get_logger(__name__)
settings = get_settings()


# =============================================================================
# FLAGS
# =============================================================================

def add_output_args(parser: argparse.ArgumentParser, formats: bool = True) -> None:
    parser.add_argument("--out-dir", default="out", help="Diretório de saída (default: out)")
    if formats:
        parser.add_argument(
            "--format",
            choices=[f.value for f in OutputFormat],
            default=OutputFormat.JSON.value,
            help="Formato adicional dos achados; o JSON é sempre gravado",
        )


def add_permutation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, required=True, help="Seed mestre (obrigatória)")
    parser.add_argument("--b", type=int, default=settings.DEFAULT_B, help="Número de permutações")
    parser.add_argument("--alpha", type=float, default=settings.DEFAULT_ALPHA)
    parser.add_argument(
        "--estimator",
        choices=["paper", "plus-one"],
        default=settings.DEFAULT_ESTIMATOR.replace("_", "-"),
        help="paper: count/B | plus-one: (1+count)/(1+B)",
    )
    parser.add_argument("--exact-threshold", type=int, default=settings.DEFAULT_EXACT_THRESHOLD)
    parser.add_argument("--threads", type=int, default=settings.DEFAULT_THREADS,
                        help="Workers do módulo estatístico (0 = todos os núcleos)")


def add_ingestion_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--exclude-ids", help="Arquivo com ids a excluir (um por linha)")
    parser.add_argument("--bin-ages", metavar="LABEL_KEY",
                        help="Converte idades numéricas nas faixas 0-3, 4-19, 20-39, 40-69, 70+")
    parser.add_argument("--relabel", action="append", default=[], metavar="KEY:FROM=TO",
                        help="Reagrupa categorias (repetível), ex: race:East Asian=Asian")


# =============================================================================
# CONFIGURAÇÃO
# =============================================================================

def permutation_config(args: argparse.Namespace) -> PermutationConfig:
    return PermutationConfig(
        b=args.b,
        alpha=args.alpha,
        seed=args.seed,
        exact_threshold=args.exact_threshold,
        estimator=Estimator(args.estimator.replace("-", "_")),
    )


def resolve_threads(requested: int) -> int:
    if requested < 0:
        raise DataValidationError(f"--threads deve ser ≥ 0 (recebido {requested}).")
    return requested or os.cpu_count() or 1


def embedding_format(path: str) -> FileFormat:
    """Formato inferido pela extensão: .csv → CSV, qualquer outra → binário."""
    return FileFormat.CSV if Path(path).suffix.lower() == ".csv" else FileFormat.BINARY


def parse_relabel(items: Sequence[str]) -> dict[str, dict[str, str]]:
    """['race:East Asian=Asian'] → {'race': {'East Asian': 'Asian'}}."""
    out: dict[str, dict[str, str]] = {}
    for item in items:
        key, sep, rest = item.partition(":")
        source, eq, target = rest.partition("=")
        if not sep or not eq or not key or not source or not target:
            raise DataValidationError(f"--relabel inválido: '{item}' (use chave:de=para).")
        out.setdefault(key, {})[source] = target
    return out


def input_digests(paths: Mapping[str, Optional[str]]) -> dict[str, str]:
    """sha256 por papel de entrada; o caminho em si não entra (digest independente do local)."""
    return {role: DatasetRepository.file_digest(p) for role, p in paths.items() if p}


def build_manifest(
    command: str,
    config: Mapping[str, Any],
    inputs: Mapping[str, str],
    threads: int = 1,
    schemas: Iterable[AttributeSchema] = (),
    vocabularies: Optional[Mapping[str, Sequence[str]]] = None,
    estimator: Optional[str] = None,
) -> RunManifest:
    return RunManifest(
        tool=settings.APP_NAME,
        version=settings.APP_VERSION,
        command=command,
        config=dict(config),
        schemas={s.name: list(s.groups) for s in schemas},
        vocabularies={k: list(v) for k, v in (vocabularies or {}).items()},
        inputs=dict(inputs),
        estimator=estimator,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        threads=threads,
    )


def preprocessing_config(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "bin_ages": args.bin_ages,
        "age_bin_edges": list(settings.AGE_BIN_EDGES) if args.bin_ages else None,
        "relabel": parse_relabel(args.relabel),
    }


# =============================================================================
# PRÉ-PROCESSAMENTO
# =============================================================================

def _exclusions(args: argparse.Namespace, repo: DatasetRepository) -> frozenset[str]:
    return repo.load_exclusion_list(args.exclude_ids) if args.exclude_ids else frozenset()


def prepare_embeddings(
    args: argparse.Namespace, repo: DatasetRepository, emb: EmbeddingSet
) -> EmbeddingSet:
    """Exclusão de ids → faixas etárias → reagrupamento (só nas chaves presentes)."""
    excluded = _exclusions(args, repo)
    if excluded:
        emb = embedding_service.exclude_ids(emb, excluded)
    if args.bin_ages and args.bin_ages in emb.labels:
        emb = embedding_service.bin_ages(emb, args.bin_ages, settings.AGE_BIN_EDGES)
    for key, mapping in parse_relabel(args.relabel).items():
        if key in emb.labels:
            emb = embedding_service.relabel(emb, key, mapping)
    return emb


def prepare_predictions(
    args: argparse.Namespace, repo: DatasetRepository, preds: PredictionSet
) -> PredictionSet:
    excluded = _exclusions(args, repo)
    if excluded:
        preds = embedding_service.exclude_prediction_ids(preds, excluded)
    if args.bin_ages and args.bin_ages in preds.attribute_labels:
        preds = embedding_service.bin_prediction_ages(preds, args.bin_ages, settings.AGE_BIN_EDGES)
    for key, mapping in parse_relabel(args.relabel).items():
        if key in preds.attribute_labels:
            preds = embedding_service.relabel_predictions(preds, key, mapping)
    return preds


# =============================================================================
# SAÍDA
# =============================================================================

def write_findings(
    out: FindingsRepository,
    doc: FindingsDocument,
    out_dir: Path,
    stem: str,
    fmt: str,
) -> list[Path]:
    """JSON sempre; CSV ou relatório markdown conforme --format."""

    written = [out.write_findings_json(doc, out_dir / f"{stem}.json")]
    if fmt == OutputFormat.CSV.value:
        written.append(out.write_findings_csv(doc, out_dir / f"{stem}.csv"))
    elif fmt == OutputFormat.MD.value:
        written.append(out.write_text(render_report([doc]), out_dir / f"{stem}.md"))
    return written
