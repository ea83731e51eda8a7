# core/utils.py - logging setup and small numeric helpers
import logging
import math
import os

NOISY_LOGGERS = ("matplotlib", "urllib3", "sentry_sdk", "numba")


def configure_logging(level=None):
    """Set the root level once and quieten third-party loggers."""
    level = (level or os.getenv("MIXBOUND_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(getattr(logging, level, logging.WARNING))
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.ERROR)


def env_int(name, default):
    """Positive integer from the environment, falling back to ``default``."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"⚠️ Ignoring {name}={raw!r}: not an integer")
        return default
    return value if value > 0 else default


def env_float(name, default):
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = float(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"⚠️ Ignoring {name}={raw!r}: not a number")
        return default
    return value if value > 0 and math.isfinite(value) else default


QUAD_TOL_FALLBACK = 1e-10


def default_quad_tol():
    """MIXBOUND_QUAD_TOL, read at call time so values loaded from .env apply."""
    return env_float("MIXBOUND_QUAD_TOL", QUAD_TOL_FALLBACK)
