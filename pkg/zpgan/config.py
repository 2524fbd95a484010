# zpgan/config.py
import os

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    APP_NAME: str = "zpgan"

    # parent of the default dataset / run directories when a command is given no path
    DATA_ROOT: str = "./runs"
    LOG_LEVEL: str = "INFO"

    # grid-search fan-out; 0 means "all available cores"
    JOBS: int = 0
    GRID_BACKEND: str = "local"

    # Same strategy as the deployed workers: REDIS_URL wins, localhost otherwise.
    CELERY_BROKER_URL: str = os.getenv("REDIS_URL", "redis://localhost:6379/0")
    CELERY_RESULT_BACKEND: str = os.getenv("REDIS_URL", "redis://localhost:6379/1")

    model_config = SettingsConfigDict(env_file=".env", env_prefix="ZPGAN_", extra="ignore")


settings = Settings()
