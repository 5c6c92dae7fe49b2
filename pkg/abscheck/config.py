import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Loads tolerances and limits from the environment / .env file."""

    # Tolerances
    VALIDITY_TOL: float = float(os.getenv("ABSCHECK_VALIDITY_TOL", 1e-12))
    SEMANTIC_TOL: float = float(os.getenv("ABSCHECK_SEMANTIC_TOL", 1e-9))
    ZERO_MASS_TOL: float = float(os.getenv("ABSCHECK_ZERO_MASS_TOL", 1e-12))

    # Desk-scale limits
    MAX_CLUSTER_VALUES: int = int(os.getenv("ABSCHECK_MAX_CLUSTER_VALUES", 64))
    EXHAUSTIVE_REMOVAL_LIMIT: int = int(os.getenv("ABSCHECK_EXHAUSTIVE_REMOVAL_LIMIT", 8))

    # Reporting
    WITNESS_LIMIT: int = int(os.getenv("ABSCHECK_WITNESS_LIMIT", 10))
    LOG_LEVEL: str = os.getenv("ABSCHECK_LOG_LEVEL", "WARNING")
    WANDB_PROJECT: str = os.getenv("ABSCHECK_WANDB_PROJECT", "abstraction-checks")

    model_config = SettingsConfigDict(case_sensitive=True)


settings = Settings()
