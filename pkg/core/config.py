# core/config.py
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from dotenv import load_dotenv
from typing import Optional

load_dotenv()  # Load environment variables from .env file
class Settings(BaseSettings):
    """
    Process-level settings loaded from .env file or environment variables.
    Run-specific settings (mesh, parameter grid, greedy) live in core.run_config.
    """
    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Online server (crbm serve / uvicorn api.main:app)
    api_host: str = "127.0.0.1"
    api_port: int = 8000
    basis_path: Optional[str] = None
    config_path: Optional[str] = None

    # Numerical thresholds shared by the reduced-basis services
    round_off_clamp: float = 1e-12
    rejection_tolerance: float = 1e-10
    # Online squared norms below this fraction of their term scale are cancellation noise
    cancellation_ratio: float = 1e-8

    model_config = SettingsConfigDict(
        env_prefix='CRBM_',
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore' # Ignore extra fields from env vars/file
    )

# Use lru_cache to load settings only once
@lru_cache
def get_settings() -> Settings:
    """Returns the process settings."""
    return Settings()

settings = get_settings()
