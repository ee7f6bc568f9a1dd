"""Application configuration."""

from __future__ import annotations

import os
from pathlib import Path


def _env_list(name: str, default: str) -> list[str]:
    raw = os.environ.get(name, default)
    return [item.strip() for item in raw.split(",") if item.strip()]


class Config:
    """Base configuration for the quantum disk toolkit."""

    BASE_DIR = Path(__file__).resolve().parent
    STORAGE_DIR = Path(os.environ.get("QDISK_STORAGE_DIR", str(BASE_DIR / "storage")))
    OUTPUT_DIR = Path(os.environ.get("QDISK_OUTPUT_DIR", str(STORAGE_DIR / "reports")))
    DB_PATH = STORAGE_DIR / "runs.db"

    # Logging - set to DEBUG for verbose output
    LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO").upper()
    LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

    # Run ledger
    DATABASE_URL = os.environ.get("QDISK_DATABASE_URL", f"sqlite:///{DB_PATH}")

    # Deformation parameter and truncation. q is always an exact "a/b" string.
    Q = os.environ.get("QDISK_Q", "1/2")
    DIM = int(os.environ.get("QDISK_DIM", "64"))
    Q_SWEEP = _env_list("QDISK_Q_SWEEP", "3/10,1/2,9/10")
    DIM_SWEEP = [int(n) for n in _env_list("QDISK_DIM_SWEEP", "32,64,128")]

    # Tolerance profile
    TOL_IDENTITY = float(os.environ.get("QDISK_TOL_IDENTITY", "1e-9"))
    TOL_QUADRATURE = float(os.environ.get("QDISK_TOL_QUADRATURE", "1e-12"))
    TOL_NORM = float(os.environ.get("QDISK_TOL_NORM", "1e-9"))

    # Quadrature
    ANGULAR_NODES = int(os.environ.get("QDISK_ANGULAR_NODES", "256"))
    POISSON_NODES = int(os.environ.get("QDISK_POISSON_NODES", "1024"))
    COHERENT_RADIUS = float(os.environ.get("QDISK_COHERENT_RADIUS", "0.95"))

    # Exact engine
    DEGREE_CAP = int(os.environ.get("QDISK_DEGREE_CAP", "64"))

    # Power iteration
    POWER_MAX_ITER = int(os.environ.get("QDISK_POWER_MAX_ITER", "200000"))

    # Randomized property sampling
    SEED = int(os.environ.get("QDISK_SEED", "20240601"))

    # HTTP surface
    SECRET_KEY = os.environ.get("QDISK_SECRET_KEY", "change-this-secret")
    MAX_API_DIM = int(os.environ.get("QDISK_MAX_API_DIM", "256"))

    @classmethod
    def ensure_directories(cls) -> None:
        """Ensure required directories exist."""
        for directory in (cls.STORAGE_DIR, cls.OUTPUT_DIR):
            directory.mkdir(parents=True, exist_ok=True)
