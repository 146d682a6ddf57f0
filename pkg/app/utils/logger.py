"""
Logger estruturado para toda a aplicação.

Usa Python logging padrão com formatação legível e consistente.
Saída em stderr: stdout fica livre para relatórios impressos pela CLI.
"""

import logging
import sys
from typing import Optional

_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
_DATEFMT = "%Y-%m-%dT%H:%M:%S"


def _default_level() -> int:
    from app.core.config import get_settings

    return logging.getLevelName(get_settings().LOG_LEVEL.upper())


def get_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """
    Retorna um logger configurado para o módulo especificado.

    Cada módulo deve chamar get_logger(__name__) para identificar
    a origem do log nos registros.
    """
    logger = logging.getLogger(name)

    # Evita adicionar handlers duplicados se o logger já foi configurado
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(fmt=_FORMAT, datefmt=_DATEFMT))
        logger.addHandler(handler)
        logger.setLevel(level if level is not None else _default_level())
        # Evita propagação para o root logger (evita logs duplicados)
        logger.propagate = False

    return logger


def set_level(level: str) -> None:
    """Ajusta o nível de todos os loggers já criados pela aplicação (flag --log-level)."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Nível de log inválido: '{level}'.")
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("app") and isinstance(logger, logging.Logger):
            logger.setLevel(numeric)
