# app/core/config.py
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from app.core.logging import env_logger as logger

ROOT = Path(__file__).resolve().parent.parent.parent

CCPRIME_VARIANTS = ("modal", "consistent", "printed")


@dataclass
class Settings:
    # --- Oracle simulator ---
    segment_um: float

    # --- Corpus runs ---
    workers: int
    oracle_floor: float

    # --- RLC model ---
    ccprime_variant: str
    twa_zeta_limit: float


def _get_env(name: str) -> str | None:
    return os.getenv(name)


def _debug_value(name: str, value: str | None):
    logger.debug(f"{name} = {value}")


def _as_float(name: str, value: str | None, default: float) -> float:
    if not value:
        return default
    try:
        return float(value)
    except ValueError:
        logger.error(f"ENV {name} must be a number, got '{value}'")
        raise


def load_settings() -> Settings:
    logger.debug("🔧 Loading analysis environment settings...")

    # .env opcional en la raíz del repo
    load_dotenv(ROOT / ".env")

    raw: dict[str, object] = {}

    seg = _get_env("XTALK_SEGMENT_UM")
    _debug_value("XTALK_SEGMENT_UM", seg)
    raw["segment_um"] = _as_float("XTALK_SEGMENT_UM", seg, 10.0)

    workers = _get_env("XTALK_WORKERS")
    _debug_value("XTALK_WORKERS", workers)
    try:
        raw["workers"] = int(workers) if workers else 1
    except ValueError:
        logger.error("ENV XTALK_WORKERS must be an integer")
        raise

    floor = _get_env("XTALK_ORACLE_FLOOR")
    _debug_value("XTALK_ORACLE_FLOOR", floor)
    raw["oracle_floor"] = _as_float("XTALK_ORACLE_FLOOR", floor, 1e-6)

    variant = _get_env("XTALK_CCPRIME_VARIANT")
    _debug_value("XTALK_CCPRIME_VARIANT", variant)
    variant = (variant or "modal").strip().lower()
    if variant not in CCPRIME_VARIANTS:
        logger.warning(
            f"⚠ XTALK_CCPRIME_VARIANT='{variant}' is not one of {CCPRIME_VARIANTS}; "
            "using 'modal'."
        )
        variant = "modal"
    raw["ccprime_variant"] = variant

    limit = _get_env("XTALK_TWA_ZETA_LIMIT")
    _debug_value("XTALK_TWA_ZETA_LIMIT", limit)
    raw["twa_zeta_limit"] = _as_float("XTALK_TWA_ZETA_LIMIT", limit, 1.5)

    if raw["segment_um"] <= 0:
        logger.error("ENV XTALK_SEGMENT_UM must be > 0")
        raise RuntimeError("Invalid XTALK_SEGMENT_UM")
    if raw["workers"] < 1:
        logger.warning("⚠ XTALK_WORKERS < 1, running corpus cases serially.")
        raw["workers"] = 1

    settings = Settings(**raw)

    logger.debug("✅ Environment settings loaded OK")
    return settings


settings = load_settings()
