"""Application configuration."""

import logging
from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def setup_logging(log_level: str = "INFO") -> logging.Logger:
    """Configure application logging."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    return logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables or `.env`."""

    # Application
    app_name: str = "Schmitt-Trigger Metastability Toolkit"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # Integration
    default_tol: float = 1e-9
    output_points: int = 1000
    max_events: int = 10_000
    max_solver_steps: int = 2_000_000

    # Sweeps
    workers: int = 1

    # CMOS model
    cmos_gmin: float = 1e-12

    # Rate Limiting
    rate_limit_enabled: bool = True
    rate_limit_default: str = "100/minute"
    rate_limit_compute: str = "20/minute"

    # API
    api_v1_prefix: str = "/api/v1"

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level name."""
        if v.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return v.upper()

    @field_validator("default_tol")
    @classmethod
    def validate_tol(cls, v: float) -> float:
        """Tolerance must lie in (0, 1e-3]."""
        if not 0.0 < v <= 1e-3:
            raise ValueError("default_tol must be in (0, 1e-3]")
        return v

    @field_validator("output_points", "max_events", "max_solver_steps", "workers")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        """Counts must be positive."""
        if v < 1:
            raise ValueError("must be at least 1")
        return v


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Initialize logger
logger = setup_logging(get_settings().log_level)
