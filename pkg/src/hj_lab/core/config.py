"""
Application-wide configuration helpers.
"""
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    output_dir: Path = Field(default=Path("out"))
    log_level: str = Field(default="INFO")

    # integration and finite differences
    dt: float = Field(default=1e-2, gt=0)
    fd_step: float = Field(default=1e-3, gt=0)
    caustic_ratio: float = Field(default=1e-6, gt=0)
    launch_oversampling: int = Field(default=1, ge=1)

    # semi-concave machinery
    activation_tol: float = Field(default=1e-9, ge=0)
    cluster_tol: float = Field(default=1e-6, gt=0)
    hull_samples: int = Field(default=3, ge=1)
    site_density: float = Field(default=20.0, gt=0)
    constant_floor: float = Field(default=1e-6, gt=0)
    constant_ceiling: float = Field(default=1e3, gt=0)

    # checkers
    hypothesis_slack: float = Field(default=1.01, ge=1.0)
    entropy_samples: int = Field(default=33, ge=2)
    algebraic_tol: float = Field(default=1e-6, ge=0)

    # output and batching
    node_chunk: int = Field(default=2048, ge=1)
    family_limit: int = Field(default=4_000_000, ge=1)
    csv_digits: int = Field(default=17, ge=1)

    class Config:
        env_prefix = "HJLAB_"


@lru_cache
def get_settings() -> Settings:
    return Settings()
