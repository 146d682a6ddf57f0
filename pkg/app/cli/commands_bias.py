"""
Comandos bias-dia e bias-dip.

bias-dia: embeddings de teste (por expressão) × probe (por grupo) → DiA validados
bias-dip: log de predições estratificado → DEO validados

Saídas em --out-dir:
    manifest.json
    findings_dia.json / findings_dip.json (+ .csv ou .md conforme --format)
    association.csv + association.json (DiA) | strata.csv + strata.json (DiP)
"""

import argparse
from pathlib import Path
from typing import Any

from app.cli import common
from app.core.config import get_settings
from app.models.schemas import (
    TIE_BREAK_RULE,
    FindingsDocument,
    PerformanceMetric,
    PermutationConfig,
    SuiteOutcome,
)
from app.repositories.embeddings_repository import DatasetRepository
from app.repositories.findings_repository import FindingsRepository
from app.services.statmod_service import EXPRESSION_LABEL_KEY, StatisticalModule
from app.utils.logger import get_logger

logger = get_logger(__name__)
settings = get_settings()


def register(subparsers: argparse._SubParsersAction) -> None:
    dia = subparsers.add_parser("bias-dia", help="Viés no espaço de features (DiA + permutação)")
    dia.add_argument("--test-embeddings", required=True)
    dia.add_argument("--probe-embeddings", required=True)
    dia.add_argument("--expression-key", default=EXPRESSION_LABEL_KEY,
                     help="Chave de rótulo da expressão no conjunto de teste")
    _add_suite_args(dia)
    dia.set_defaults(func=cmd_bias_dia)

    dip = subparsers.add_parser("bias-dip", help="Viés de desempenho (DEO + permutação)")
    dip.add_argument("--predictions", required=True)
    dip.add_argument("--min-stratum-size", type=int, default=settings.DEFAULT_MIN_STRATUM_SIZE)
    dip.add_argument(
        "--metric",
        choices=[m.value for m in PerformanceMetric],
        default=PerformanceMetric.TPR.value,
        help="Métrica por estrato comparada entre grupos",
    )
    _add_suite_args(dip)
    dip.set_defaults(func=cmd_bias_dip)


def _add_suite_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--attribute", action="append", required=True,
                        help="Arquivo de esquema do atributo (repetível); nome = stem do arquivo")
    parser.add_argument("--expressions", required=True, help="Vocabulário de expressões (um por linha)")
    common.add_permutation_args(parser)
    common.add_ingestion_args(parser)
    common.add_output_args(parser)


def _suite_config(cfg: PermutationConfig, args: argparse.Namespace, **extra: Any) -> dict[str, Any]:
    return {
        "permutation": cfg.model_dump(mode="json"),
        "permutation_batch_size": settings.PERMUTATION_BATCH_SIZE,
        **common.preprocessing_config(args),
        **extra,
    }


def _metadata(cfg: PermutationConfig, outcomes: list[SuiteOutcome]) -> dict[str, Any]:
    return {
        "source": outcomes[0].source.value,
        "alpha": cfg.alpha,
        "b": cfg.b,
        "estimator": cfg.estimator.value,
        "tie_break": TIE_BREAK_RULE,
        "multiple_comparison_correction": "none",
        "tests_performed": sum(o.tests_performed for o in outcomes),
        "drops": [d.model_dump(mode="json") for o in outcomes for d in o.drops],
        "excluded_samples": {o.attribute: o.excluded_samples for o in outcomes},
    }


# =============================================================================
# bias-dia
# =============================================================================

def cmd_bias_dia(args: argparse.Namespace) -> int:
    repo, out = DatasetRepository(), FindingsRepository()
    out_dir = Path(args.out_dir)

    vocab = repo.load_vocabulary(args.expressions)
    schemas = [repo.load_schema(p) for p in args.attribute]
    test = repo.load_embeddings(args.test_embeddings, common.embedding_format(args.test_embeddings),
                                required_labels=(args.expression_key,))
    probe = repo.load_embeddings(args.probe_embeddings, common.embedding_format(args.probe_embeddings),
                                 required_labels=tuple(s.name for s in schemas))
    test = common.prepare_embeddings(args, repo, test)
    probe = common.prepare_embeddings(args, repo, probe)

    cfg = common.permutation_config(args)
    threads = common.resolve_threads(args.threads)
    manifest = common.build_manifest(
        command="bias-dia",
        config=_suite_config(cfg, args, expression_key=args.expression_key),
        inputs=common.input_digests({
            "test_embeddings": args.test_embeddings,
            "probe_embeddings": args.probe_embeddings,
            "expressions": args.expressions,
            "exclude_ids": args.exclude_ids,
            **{f"attribute:{s.name}": p for s, p in zip(schemas, args.attribute)},
        }),
        threads=threads,
        schemas=schemas,
        vocabularies={"expressions": vocab},
        estimator=cfg.estimator.value,
    )

    logger.info(
        f"bias-dia | atributos={[s.name for s in schemas]} | expressões={len(vocab)} | "
        f"B={cfg.b} | alpha={cfg.alpha} | threads={threads}"
    )
    module = StatisticalModule(cfg, threads)
    outcomes = [module.run_dia(test, probe, vocab, s, args.expression_key) for s in schemas]

    doc = FindingsDocument(
        manifest_digest=manifest.digest,
        metadata=_metadata(cfg, outcomes),
        findings=[f for o in outcomes for f in o.findings],
    )
    out.write_manifest(manifest, out_dir / "manifest.json")
    common.write_findings(out, doc, out_dir, "findings_dia", args.format)
    tables = [t for o in outcomes for t in o.tables]
    out.write_association_csv(tables, manifest.digest, out_dir / "association.csv")
    out.write_association_json(tables, manifest.digest, out_dir / "association.json")
    logger.info(f"bias-dia concluído | testes={doc.metadata['tests_performed']} | out={out_dir}")
    return 0


# =============================================================================
# bias-dip
# =============================================================================

def cmd_bias_dip(args: argparse.Namespace) -> int:
    repo, out = DatasetRepository(), FindingsRepository()
    out_dir = Path(args.out_dir)

    vocab = repo.load_vocabulary(args.expressions)
    schemas = [repo.load_schema(p) for p in args.attribute]
    preds = common.prepare_predictions(args, repo, repo.load_predictions(args.predictions, vocab))

    cfg = common.permutation_config(args)
    threads = common.resolve_threads(args.threads)
    manifest = common.build_manifest(
        command="bias-dip",
        config=_suite_config(cfg, args, min_stratum_size=args.min_stratum_size, metric=args.metric),
        inputs=common.input_digests({
            "predictions": args.predictions,
            "expressions": args.expressions,
            "exclude_ids": args.exclude_ids,
            **{f"attribute:{s.name}": p for s, p in zip(schemas, args.attribute)},
        }),
        threads=threads,
        schemas=schemas,
        vocabularies={"expressions": vocab},
        estimator=cfg.estimator.value,
    )

    logger.info(
        f"bias-dip | atributos={[s.name for s in schemas]} | amostras={preds.n} | "
        f"B={cfg.b} | alpha={cfg.alpha} | min_stratum_size={args.min_stratum_size} | metric={args.metric}"
    )
    module = StatisticalModule(cfg, threads)
    metric = PerformanceMetric(args.metric)
    outcomes = [module.run_dip(preds, vocab, s, args.min_stratum_size, metric) for s in schemas]

    doc = FindingsDocument(
        manifest_digest=manifest.digest,
        metadata=_metadata(cfg, outcomes),
        findings=[f for o in outcomes for f in o.findings],
    )
    out.write_manifest(manifest, out_dir / "manifest.json")
    common.write_findings(out, doc, out_dir, "findings_dip", args.format)
    strata = [(o.attribute, s) for o in outcomes for s in o.strata]
    out.write_strata_csv(strata, manifest.digest, out_dir / "strata.csv")
    out.write_strata_json(strata, manifest.digest, out_dir / "strata.json")
    logger.info(f"bias-dip concluído | testes={doc.metadata['tests_performed']} | out={out_dir}")
    return 0
