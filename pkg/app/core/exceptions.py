"""
Exceções de domínio.

A CLI traduz cada família em um código de saída:
    DataValidationError     → exit 1 (entrada inválida, estrato vazio, vocabulário)
    StatisticalModuleError  → exit 2 (falha durante testes de permutação)
"""


class DataValidationError(ValueError):
    """Violação de formato, esquema ou invariante nos dados de entrada."""


class StatisticalModuleError(RuntimeError):
    """Falha no módulo estatístico (permutações, suítes de teste)."""
