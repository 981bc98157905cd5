import importlib.util
import logging
import os
import sys

from engine.errors import StrategyLoadError
from utils.settings import PROJECT_ROOT, setting

logger = logging.getLogger(__name__)

BUILTIN_STRATEGIES = ('manual', 'leveling', 'permutation')


def strategies_dir():
    return os.path.join(PROJECT_ROOT, setting('app', 'strategies_dir', 'strategies'))


def builtin_strategy_path(kind):
    if kind not in BUILTIN_STRATEGIES:
        raise StrategyLoadError(f"Unknown built-in strategy {kind!r}; choose one of {', '.join(BUILTIN_STRATEGIES)}")
    return os.path.join(strategies_dir(), f"{kind}.py")


def load_strategy(strategy_path, params=None):
    """
    Dynamically load a masking strategy module from a file path.

    The module must contain a Strategy class with a propose_coefficients
    method taking (approx_coeffs, extrema) and returning the new coefficients.

    Args:
        strategy_path: Path to the Python file containing the strategy
        params: keyword arguments for the Strategy constructor

    Returns:
        Instance of the Strategy class from the loaded module

    Raises:
        StrategyLoadError: If the file doesn't exist, can't be imported,
            or doesn't provide the required class and method
    """
    strategy_path = os.fspath(strategy_path)
    if not os.path.exists(strategy_path):
        raise StrategyLoadError(f"Strategy file not found: {strategy_path}")

    if not strategy_path.endswith('.py'):
        raise StrategyLoadError("Strategy file must be a Python (.py) file")

    # Prefixed so a plugin called e.g. "random.py" never shadows a real module
    module_name = 'groupanon_strategy_' + os.path.splitext(os.path.basename(strategy_path))[0]

    try:
        spec = importlib.util.spec_from_file_location(module_name, strategy_path)
        if spec is None or spec.loader is None:
            raise StrategyLoadError(f"Failed to load module spec from {strategy_path}")

        module = importlib.util.module_from_spec(spec)
        sys.modules[module_name] = module
        spec.loader.exec_module(module)
    except StrategyLoadError:
        raise
    except Exception as e:
        raise StrategyLoadError(f"Error loading strategy {strategy_path}: {e}") from e

    if not hasattr(module, 'Strategy'):
        raise StrategyLoadError("Strategy file must contain a 'Strategy' class")

    try:
        strategy_instance = module.Strategy(**(params or {}))
    except TypeError as e:
        raise StrategyLoadError(f"Invalid parameters for {os.path.basename(strategy_path)}: {e}") from e

    if not callable(getattr(strategy_instance, 'propose_coefficients', None)):
        raise StrategyLoadError("Strategy class must implement 'propose_coefficients' method")

    logger.debug("Loaded strategy %s with %s", strategy_path, params)
    return strategy_instance
