import os
from pathlib import Path
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent.parent  # repo root

load_dotenv(BASE_DIR / ".env")


def _float(name: str, default: float) -> float:
    return float(os.getenv(name, default))


def _int(name: str, default: int) -> int:
    return int(os.getenv(name, default))


class Settings:
    # Leaf tracing (flat-metric units)
    TRACE_STEP: float = _float("TRACE_STEP", 1e-3)
    TRACE_SING_RADIUS: float = _float("TRACE_SING_RADIUS", 1e-4)
    TRACE_CLOSE_TOL: float = _float("TRACE_CLOSE_TOL", 1e-5)
    TRACE_LENGTH_BUDGET: float = _float("TRACE_LENGTH_BUDGET", 100.0)
    TRACE_CHART_SWITCH_RADIUS: float = _float("TRACE_CHART_SWITCH_RADIUS", 4.0)
    TRACE_WORKERS: int = _int("TRACE_WORKERS", 1)

    # Polynomial arithmetic
    ROOT_CLUSTER_TOL: float = _float("ROOT_CLUSTER_TOL", 1e-8)

    # Cover solver
    NEWTON_STARTS: int = _int("NEWTON_STARTS", 64)
    NEWTON_MAX_ITER: int = _int("NEWTON_MAX_ITER", 200)
    NEWTON_RADIUS: float = _float("NEWTON_RADIUS", 3.0)
    STREBEL_SEED: int = _int("STREBEL_SEED", 0)

    # Elliptic slope search
    ELLIPTIC_Q_BOUND: int = _int("ELLIPTIC_Q_BOUND", 50)

    # HTTP service
    MAX_SESSIONS: int = _int("MAX_SESSIONS", 64)
    CORS_ORIGINS: list = [o.strip() for o in os.getenv("CORS_ORIGINS", "").split(",") if o.strip()]

    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", str(BASE_DIR / "output"))
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")


settings = Settings()
