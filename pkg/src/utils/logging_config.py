import logging
import os

from utils.settings import setting

LOG_LEVEL_ENV = "GROUPANON_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def resolve_level(level=None):
    """Explicit level, else $GROUPANON_LOG_LEVEL, else app.log_level, else WARNING."""
    name = level or os.environ.get(LOG_LEVEL_ENV) or setting("app", "log_level") or "WARNING"
    resolved = logging.getLevelName(str(name).upper())
    return resolved if isinstance(resolved, int) else logging.WARNING


def configure_logging(level=None):
    level = resolve_level(level)
    # No-op for handlers when the root logger is already set up (e.g. under pytest)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
    return level
