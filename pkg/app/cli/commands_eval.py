"""
Comandos de avaliação: compare, avgbias e alpha-sweep.

Wrappers finos sobre evalcmp_service. Os CSVs seguem a convenção de
relatório (valores × 100, 2 casas); o JSON ao lado cita o manifesto.
"""

import argparse
from pathlib import Path

from app.cli import common
from app.core.exceptions import DataValidationError
from app.models.schemas import AVG_BIAS_NORMALIZATION, BiasFinding, RunManifest
from app.repositories.findings_repository import FindingsRepository, percent
from app.services import evalcmp_service
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    compare = subparsers.add_parser("compare", help="Distância L1 de métodos contra o ground truth")
    compare.add_argument("--truth", required=True, help="Achados do ground truth")
    compare.add_argument("--method", action="append", required=True, metavar="NOME=ARQUIVO",
                         help="Achados de um método (repetível)")
    common.add_output_args(compare, formats=False)
    compare.set_defaults(func=cmd_compare)

    avg = subparsers.add_parser("avgbias", help="AvgBias de um ou mais arquivos de achados")
    avg.add_argument("--findings", action="append", required=True, metavar="[NOME=]ARQUIVO",
                     help="Arquivo de achados; repetido → uma linha por execução")
    avg.add_argument("--truth", help="Exclui achados cuja referência difere do ground truth")
    avg.add_argument("--alpha", type=float, help="Reaplica o limiar com este α")
    common.add_output_args(avg, formats=False)
    avg.set_defaults(func=cmd_avgbias)

    sweep = subparsers.add_parser("alpha-sweep", help="AvgBias(α) sem refazer permutações")
    sweep.add_argument("--findings", required=True)
    sweep.add_argument("--alphas", default=None, help="início:fim:passo (default 0.01:0.10:0.01)")
    sweep.add_argument("--truth")
    common.add_output_args(sweep, formats=False)
    sweep.set_defaults(func=cmd_alpha_sweep)


def _named(item: str) -> tuple[str, str]:
    name, sep, path = item.partition("=")
    if sep and name and path:
        return name, path
    return Path(item).stem, item


def _load(repo: FindingsRepository, path: str) -> list[BiasFinding]:
    return repo.load_findings(path).findings


def _manifest(command: str, config: dict, inputs: dict[str, str | None]) -> RunManifest:
    return common.build_manifest(command=command, config=config, inputs=common.input_digests(inputs))


# =============================================================================
# compare
# =============================================================================

def cmd_compare(args: argparse.Namespace) -> int:
    repo = FindingsRepository()
    out_dir = Path(args.out_dir)
    methods_paths = dict(_named(m) for m in args.method)
    if len(methods_paths) != len(args.method):
        raise DataValidationError("Nomes de método repetidos em --method.")

    truth = _load(repo, args.truth)
    methods = {name: _load(repo, path) for name, path in methods_paths.items()}
    rows, best = evalcmp_service.compare_methods(truth, methods)

    manifest = _manifest(
        "compare",
        {"methods": list(methods_paths)},
        {"truth": args.truth, **{f"method:{n}": p for n, p in methods_paths.items()}},
    )
    repo.write_manifest(manifest, out_dir / "manifest.json")

    for name in methods_paths:
        for attribute in dict.fromkeys(r.attribute for r in rows):
            subset = [r for r in rows if r.method == name and r.attribute == attribute]
            repo.write_comparison_csv(subset, out_dir / f"compare_{name}_{attribute}.csv")

    repo.write_json(
        {
            "manifest_digest": manifest.digest,
            "rows": [r.model_dump(mode="json") for r in rows],
            "best_method": [
                {"attribute": a, "expression": e, "method": m} for (a, e), m in best.items()
            ],
        },
        out_dir / "comparison.json",
    )
    mismatches = sum(1 for r in rows if not r.reference_match)
    logger.info(f"compare concluído | métodos={list(methods_paths)} | linhas={len(rows)} | NaN={mismatches}")
    return 0


# =============================================================================
# avgbias
# =============================================================================

def cmd_avgbias(args: argparse.Namespace) -> int:
    repo = FindingsRepository()
    out_dir = Path(args.out_dir)
    named = dict(_named(f) for f in args.findings)
    truth = _load(repo, args.truth) if args.truth else None

    manifest = _manifest(
        "avgbias",
        {"alpha": args.alpha, "normalization": AVG_BIAS_NORMALIZATION},
        {**{f"findings:{n}": p for n, p in named.items()}, "truth": args.truth},
    )
    repo.write_manifest(manifest, out_dir / "manifest.json")

    if len(named) > 1:
        if truth is not None or args.alpha is not None:
            raise DataValidationError("--truth/--alpha não se aplicam à comparação entre execuções.")
        runs = evalcmp_service.multi_run_compare({n: _load(repo, p) for n, p in named.items()})
        repo.write_runs_csv(runs, out_dir / "runs.csv")
        repo.write_json(
            {"manifest_digest": manifest.digest, "runs": [r.model_dump(mode="json") for r in runs]},
            out_dir / "runs.json",
        )
        for r in runs:
            print(f"{r.run}\t{percent(r.result.value)}")
        return 0

    (path,) = named.values()
    result = evalcmp_service.avg_bias(_load(repo, path), truth=truth, alpha=args.alpha)
    repo.write_json(
        {"manifest_digest": manifest.digest, **result.model_dump(mode="json")},
        out_dir / "avgbias.json",
    )
    print(f"AvgBias = {percent(result.value)}% (incluídos={result.included_entries}, "
          f"excluídos={result.excluded_nan})")
    return 0


# =============================================================================
# alpha-sweep
# =============================================================================

def cmd_alpha_sweep(args: argparse.Namespace) -> int:
    repo = FindingsRepository()
    out_dir = Path(args.out_dir)
    alphas = (
        evalcmp_service.parse_alpha_range(args.alphas) if args.alphas else evalcmp_service.default_alphas()
    )
    truth = _load(repo, args.truth) if args.truth else None
    sweep = evalcmp_service.alpha_sweep(_load(repo, args.findings), alphas, truth=truth)

    manifest = _manifest("alpha-sweep", {"alphas": alphas}, {"findings": args.findings, "truth": args.truth})
    repo.write_manifest(manifest, out_dir / "manifest.json")
    repo.write_alpha_sweep_csv(sweep, out_dir / "alpha_sweep.csv")
    repo.write_json(
        {"manifest_digest": manifest.digest, **sweep.model_dump(mode="json")},
        out_dir / "alpha_sweep.json",
    )
    return 0
