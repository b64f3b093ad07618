from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MERGESUM_", env_file=".env", extra="ignore")

    # Tolerance classes
    FLOAT_REL_TOL: float = 1e-9
    FLOAT_ABS_TOL: float = 1e-9
    PROBABILITY_TOL: float = 1e-12
    FREQUENCY_TOL: float = 1e-9

    # Summary files
    FORMAT_VERSION: int = 1
    FLOAT_ENCODING: Literal["decimal", "hex"] = "decimal"

    # Engine
    WORKERS: int = 4

    # Verification
    WITNESS_MAX_UNIVERSE: int = 12
    WITNESS_MAX_SIZE: int = 4
    DEFAULT_SPLITS: int = 1000
    DEFAULT_SEED: int = 0

    LOG_LEVEL: str = "INFO"

    # HTTP service
    API_HOST: str = "0.0.0.0"
    API_PORT: int = 8000


settings = Settings()
