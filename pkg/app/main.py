"""
Ponto de entrada principal da CLI de auditoria de viés.

Responsável por:
- Montar o parser com um subcomando por operação
- Ajustar o nível de log (--log-level)
- Handler global de exceções → código de saída

Códigos de saída:
    0  sucesso
    1  falha de validação (entrada inválida, arquivo ausente, estrato vazio)
    2  falha no módulo estatístico ou erro inesperado

Para rodar localmente:
    python -m app.main synth --seed 7 --out-dir demo
    python -m app.main bias-dia --test-embeddings demo/test_embeddings.febe \
        --probe-embeddings demo/probe_embeddings.febe --attribute demo/gender.txt \
        --expressions demo/expressions.txt --seed 7 --out-dir demo/dia
"""

import argparse
import sys
from typing import Optional, Sequence

from app.cli import commands_bias, commands_eval, commands_report, commands_synth
from app.core.config import get_settings
from app.core.exceptions import StatisticalModuleError
from app.utils.logger import get_logger, set_level

logger = get_logger(__name__)
settings = get_settings()

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_STATISTICAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ferbias",
        description="Auditoria de viés demográfico em embeddings e predições de classificadores.",
    )
    parser.add_argument("--version", action="version", version=f"{settings.APP_NAME} {settings.APP_VERSION}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (commands_bias, commands_eval, commands_synth, commands_report):
        module.register(subparsers)
    return parser


# =============================================================================
# HANDLER GLOBAL DE EXCEÇÕES
# =============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_level(args.log_level)
    logger.debug(f"Comando | {args.command} | {vars(args)}")

    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        logger.error(f"Falha de validação | command={args.command} | {exc}")
        return EXIT_VALIDATION
    except StatisticalModuleError as exc:
        logger.error(f"Falha no módulo estatístico | command={args.command} | {exc}")
        return EXIT_STATISTICAL
    except Exception as exc:
        logger.error(
            f"Exceção não tratada | command={args.command} | error={type(exc).__name__}: {exc}",
            exc_info=True,
        )
        return EXIT_STATISTICAL


if __name__ == "__main__":
    sys.exit(main())
