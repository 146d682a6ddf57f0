"""
Configurações centralizadas da aplicação via Pydantic Settings.

Valores padrão do módulo estatístico e da ingestão são lidos do ambiente
(ou do arquivo .env). Flags da CLI sempre têm precedência sobre estes valores.

Decisão técnica: pydantic-settings garante tipagem forte nas configs
e falha na inicialização se alguma variável vier com tipo inválido.
A seed mestre NÃO fica aqui: ela entra exclusivamente por --seed.
"""

from functools import lru_cache
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # === Aplicação ===
    APP_ENV: str = "development"
    APP_NAME: str = "FerBiasAudit"
    APP_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # === Módulo estatístico ===
    DEFAULT_B: int = Field(10000, ge=1)
    DEFAULT_ALPHA: float = Field(0.05, gt=0.0, lt=1.0)
    DEFAULT_EXACT_THRESHOLD: int = Field(100000, ge=0)
    DEFAULT_ESTIMATOR: str = "paper"
    # Linhas de permutação por bloco de contador; muda os sorteios e vai no manifesto
    PERMUTATION_BATCH_SIZE: int = Field(512, ge=1)

    # === Estratificação / execução ===
    DEFAULT_MIN_STRATUM_SIZE: int = Field(1, ge=1)
    DEFAULT_THREADS: int = Field(0, ge=0)  # 0 = os.cpu_count()

    # === Ingestão ===
    EMBEDDING_DIM_DEFAULT: int = 512
    # Limites inferiores das faixas 4-19, 20-39, 40-69 e 70+ (a primeira é 0-3)
    AGE_BIN_EDGES: list[int] = [4, 20, 40, 70]

    # === Avaliação ===
    ALPHA_SWEEP: str = "0.01:0.10:0.01"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="FERBIAS_",
        extra="ignore",
        case_sensitive=False,
    )


@lru_cache()
def get_settings() -> Settings:
    """
    Singleton das configurações usando cache de função.
    Garante que o .env seja lido apenas uma vez durante toda a execução.
    """
    return Settings()
