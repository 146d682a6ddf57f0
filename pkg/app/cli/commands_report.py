"""Comando report: renderiza arquivos de achados em markdown (stdout + report.md)."""

import argparse
from pathlib import Path

from app.cli import common
from app.repositories.findings_repository import FindingsRepository
from app.services.report_service import parse_abbreviations, render_report
from app.utils.logger import get_logger

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    report = subparsers.add_parser("report", help="Tabelas markdown dos achados validados")
    report.add_argument("findings", nargs="+", help="Arquivos de achados (.json ou .csv)")
    report.add_argument("--abbrev", action="append", default=[], metavar="NOME=ABREV",
                        help="Abreviação de grupo (repetível), ex: Female=F")
    report.add_argument("--highlight-above", type=float, metavar="PERCENT",
                        help="Valores acima deste percentual em negrito")
    report.add_argument("--require-attribute", action="append", default=[],
                        help="Atributo que precisa constar nos achados (repetível)")
    common.add_output_args(report, formats=False)
    report.set_defaults(func=cmd_report)


def cmd_report(args: argparse.Namespace) -> int:
    repo = FindingsRepository()
    docs = [repo.load_findings(p) for p in args.findings]
    text = render_report(
        docs,
        abbrev=parse_abbreviations(args.abbrev),
        highlight_above=args.highlight_above,
        attributes=args.require_attribute,
    )
    path = repo.write_text(text, Path(args.out_dir) / "report.md")
    print(text, end="")
    logger.info(f"Relatório gravado | path={path}")
    return 0
