"""Comandos da CLI: cada módulo registra seus subcomandos via register(subparsers)."""
