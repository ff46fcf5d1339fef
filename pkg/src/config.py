"""Application configuration."""

import os
from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    # App Settings
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    # Parallelism (0 means one worker per CPU)
    RANDSURF_THREADS: int = 0

    @property
    def worker_count(self) -> int:
        """Number of worker threads for independent chains."""
        if self.RANDSURF_THREADS > 0:
            return self.RANDSURF_THREADS
        return os.cpu_count() or 1

    # Special functions
    THETA_TOL: float = 1e-17
    THETA_MAX_TERMS: int = 200
    AIRY_SWITCH: float = 6.0
    AIRY_MAX_ABS: float = 60.0
    HERMITE_MAX: int = 64

    # Free probability
    FREE_CONV_ORDER: int = 16
    RICHARDSON_EPS: str = "1e-4,5e-5"
    DENSITY_GRID: int = 400

    @property
    def richardson_eps(self) -> List[float]:
        """Parse the two offsets used for boundary-value extrapolation."""
        return [float(v.strip()) for v in self.RICHARDSON_EPS.split(",") if v.strip()]

    # Maps
    WICK_MAX_HALF_EDGES: int = 16

    # Monte Carlo
    MC_STEPS: int = 200
    MC_BURN_IN: int = 50
    MC_THINNING: int = 2
    MC_PROPOSAL_SCALE: float = 0.5
    MC_QUARTIC_REGULATOR: float = 0.05

    # Spectral curves
    BOUNDARY_EPS: float = 1e-7
    NEWTON_TOL: float = 1e-12
    NEWTON_MAX_ITER: int = 60
    CRITICAL_MARGIN: float = 0.05


settings = Settings()
