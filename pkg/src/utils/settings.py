import os
from functools import lru_cache

import yaml

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
APP_CONFIG_PATH = os.path.join(PROJECT_ROOT, "config", "config.yaml")


@lru_cache(maxsize=1)
def app_settings():
    """
    Load application defaults from config/config.yaml.

    Cached for the life of the process. A missing or broken file yields an
    empty mapping so library code still runs with built-in defaults.
    """
    try:
        with open(APP_CONFIG_PATH, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError):
        return {}


def setting(section, key, default=None):
    return (app_settings().get(section) or {}).get(key, default)
