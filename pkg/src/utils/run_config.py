"""
Run configuration: YAML file + CLI overrides -> validated RunConfig.

Key names are documented in CONFIG_GUIDE.md. Relative paths are taken
relative to the working directory.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple, Union

import numpy as np
import yaml

from engine.errors import ConfigError, GroupAnonymityError
from engine.masking_pipeline import (
    ROUNDING_MODES,
    MaskingStrategy,
    normalize_choice,
)
from engine.signal_builder import GroupSpec, PairedGroupSpec, compile_combinations
from utils.microdata_store import DENOMINATOR_PRESERVING, FREE, REDISTRIBUTION_MODES
from utils.settings import setting

logger = logging.getLogger(__name__)

QUANTITY_MODE = "quantity"
CONCENTRATION_MODE = "concentration"
DIFFERENCE_MODE = "difference"
MODES = (QUANTITY_MODE, CONCENTRATION_MODE, DIFFERENCE_MODE)

_SIGNAL_KEYS = {
    QUANTITY_MODE: ("quantity",),
    CONCENTRATION_MODE: ("quantity", "totals"),
    DIFFERENCE_MODE: ("main", "subordinate", "totals"),
}


@dataclass(frozen=True)
class EmbeddedSignals:
    """Signals given directly in the config instead of counted from a microfile."""

    labels: Tuple[str, ...]
    series: Mapping[str, Tuple[float, ...]] = field(default_factory=dict)

    def vector(self, name):
        return np.array(self.series[name], dtype=float)


@dataclass(frozen=True)
class RunConfig:
    name: str
    mode: str
    strategy: MaskingStrategy
    wavelet_order: int = 1
    level: int = 1
    input_path: Optional[Path] = None
    output_path: Optional[Path] = None
    report_path: Optional[Path] = None
    record_path: Optional[Path] = None
    plot_path: Optional[Path] = None
    chart_path: Optional[Path] = None
    group: Optional[GroupSpec] = None
    paired: Optional[PairedGroupSpec] = None
    signals: Optional[EmbeddedSignals] = None
    extrema: Optional[Tuple[int, ...]] = None
    extremum_threshold: float = 3.0
    offset: Optional[float] = None
    rounding: str = "nearest"
    policy: Union[str, Tuple[str, ...]] = "balanced"
    seed: int = 0
    redistribution_mode: str = FREE
    strict: bool = False
    deviation_factor: float = 0.5

    @property
    def uses_microfile(self):
        return self.input_path is not None


def _read_yaml(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Config {path} is not valid YAML: {e}") from e
    if not isinstance(loaded, Mapping):
        raise ConfigError(f"Config {path} must be a mapping of keys")
    return loaded


def _section(block, key, where, required=False):
    value = block.get(key)
    if value is None:
        if required:
            raise ConfigError(f"missing '{where}{key}'")
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{where}{key}' must be a mapping")
    return value


def _number_list(values, where, cast=float):
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"'{where}' must be a list")
    try:
        return tuple(cast(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'{where}' must hold numbers: {e}") from e


def parse_parameter_values(values, where="parameter.values"):
    """A list of codes, or {start, stop, step} with an inclusive stop."""
    if isinstance(values, Mapping) and "start" in values:
        try:
            start, stop, step = int(values["start"]), int(values["stop"]), int(values.get("step", 1))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"'{where}' range needs integer start/stop/step: {e}") from e
        if step <= 0 or stop < start:
            raise ConfigError(f"'{where}' range {start}..{stop} step {step} is empty")
        return tuple(str(v) for v in range(start, stop + 1, step))
    if isinstance(values, (list, tuple)) and values:
        return tuple(str(v) for v in values)
    raise ConfigError(f"'{where}' must be a non-empty list or a {{start, stop, step}} range")


def _parse_combinations(block, where):
    if "vital" in block:
        value_sets = block["vital"]
        if not isinstance(value_sets, Mapping) or not value_sets:
            raise ConfigError(f"'{where}vital' must map attributes to values")
        return compile_combinations(value_sets)
    if "vital_attributes" in block and "combinations" in block:
        attrs = tuple(str(a) for a in block["vital_attributes"])
        return attrs, frozenset(tuple(str(v) for v in combo) for combo in block["combinations"])
    raise ConfigError(f"'{where}' needs 'vital' or 'vital_attributes' + 'combinations'")


def _parse_denominator(value_sets, where):
    if not value_sets:
        return None, None
    if not isinstance(value_sets, Mapping):
        raise ConfigError(f"'{where}denominator' must map attributes to values")
    return compile_combinations(value_sets)


def _parse_group(block, where, parameter=None, denominator=None):
    parameter = parameter or _section(block, "parameter", where, required=True)
    if "attribute" not in parameter or "values" not in parameter:
        raise ConfigError(f"'{where}parameter' needs 'attribute' and 'values'")
    if denominator is None:
        denominator = block.get("denominator")
    vital_attrs, combinations = _parse_combinations(block, where)
    denominator_attrs, denominator_combinations = _parse_denominator(denominator, where)
    return GroupSpec(
        vital_attrs=vital_attrs,
        vital_combinations=combinations,
        parameter_attr=str(parameter["attribute"]),
        parameter_values=parse_parameter_values(parameter["values"], f"{where}parameter.values"),
        denominator_attrs=denominator_attrs,
        denominator_combinations=denominator_combinations,
    )


def _parse_paired(block):
    parameter = _section(block, "parameter", "paired.", required=True)
    denominator = block.get("denominator")
    main = _parse_group(_section(block, "main", "paired.", required=True), "paired.main.", parameter, denominator)
    subordinate = _parse_group(
        _section(block, "subordinate", "paired.", required=True), "paired.subordinate.", parameter, denominator
    )
    return PairedGroupSpec(main, subordinate)


def _parse_signals(block, mode):
    if "labels" not in block:
        raise ConfigError("'signals' needs 'labels'")
    labels = parse_parameter_values(block["labels"], "signals.labels")
    series = {}
    for key in _SIGNAL_KEYS[mode]:
        if key not in block:
            raise ConfigError(f"{mode} mode needs 'signals.{key}'")
        series[key] = _number_list(block[key], f"signals.{key}")
        if len(series[key]) != len(labels):
            raise ConfigError(f"'signals.{key}' has {len(series[key])} values for {len(labels)} labels")
    return EmbeddedSignals(labels, series)


def _parse_strategy(block):
    if "kind" not in block:
        raise ConfigError("missing 'strategy.kind'")
    coefficients = block.get("coefficients")
    targets = block.get("targets")
    return MaskingStrategy(
        kind=block["kind"],
        manual_coeffs=_number_list(coefficients, "strategy.coefficients") if coefficients is not None else None,
        targets=_number_list(targets, "strategy.targets", int) if targets is not None else None,
        strength=float(block.get("strength", 1.0)),
        path=block.get("path"),
        options=block.get("options") or {},
    )


def _parse_policy(value):
    if isinstance(value, (list, tuple)):
        return tuple(normalize_choice(v) for v in value)
    return normalize_choice(value)


def _path_or_none(value):
    return Path(value) if value else None


def load_run_config(path, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Read a run config and apply CLI overrides.

    Args:
        path: YAML config file
        overrides: mode, seed, offset, rounding, plot_path, chart_path, out_dir
                   (None values are ignored)

    Raises:
        ConfigError (or another config-family error) naming the offending key
    """
    raw = _read_yaml(path)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    defaults = setting("defaults", "wavelet", {}) or {}

    name = str(raw.get("name") or Path(path).stem)
    mode = normalize_choice(overrides.get("mode", raw.get("mode", "")))
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {', '.join(MODES)}, got {mode!r}")

    wavelet = _section(raw, "wavelet", "")
    try:
        order = int(wavelet.get("order", defaults.get("order", 1)))
        level = int(wavelet.get("level", defaults.get("level", 1)))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'wavelet.order' and 'wavelet.level' must be integers: {e}") from e

    input_path = _path_or_none(raw.get("input"))
    if input_path is not None and raw.get("signals"):
        raise ConfigError("give either 'input' or 'signals', not both")
    if input_path is None and not raw.get("signals"):
        raise ConfigError("config needs 'input' (a microfile) or 'signals'")

    group = paired = signals = None
    if input_path is not None:
        if mode == DIFFERENCE_MODE:
            paired = _parse_paired(_section(raw, "paired", "", required=True))
        else:
            group = _parse_group(_section(raw, "group", "", required=True), "group.")
    else:
        signals = _parse_signals(_section(raw, "signals", "", required=True), mode)

    rounding = normalize_choice(overrides.get("rounding", raw.get("rounding", setting("defaults", "rounding", "nearest"))))
    if rounding not in ROUNDING_MODES:
        raise ConfigError(f"'rounding' must be nearest or sum-preserving, got {rounding!r}")

    default_mode = FREE if mode == QUANTITY_MODE else DENOMINATOR_PRESERVING
    redistribution = normalize_choice(_section(raw, "redistribution", "").get("mode", default_mode))
    if redistribution not in REDISTRIBUTION_MODES:
        raise ConfigError(f"'redistribution.mode' must be free or denominator-preserving, got {redistribution!r}")

    offset = overrides.get("offset", raw.get("offset"))
    extrema = raw.get("extrema")
    out_dir = Path(overrides.get("out_dir", raw.get("output_dir", setting("defaults", "output_dir", "out"))))

    try:
        config = RunConfig(
            name=name,
            mode=mode,
            strategy=_parse_strategy(_section(raw, "strategy", "", required=True)),
            wavelet_order=order,
            level=level,
            input_path=input_path,
            output_path=_path_or_none(raw.get("output")),
            report_path=_path_or_none(raw.get("report")) or out_dir / f"{name}.report.txt",
            record_path=_path_or_none(raw.get("record")) or out_dir / f"{name}.run.yaml",
            plot_path=_path_or_none(overrides.get("plot_path", raw.get("plot"))),
            chart_path=_path_or_none(overrides.get("chart_path", raw.get("chart"))),
            group=group,
            paired=paired,
            signals=signals,
            extrema=_number_list(extrema, "extrema", int) if extrema is not None else None,
            extremum_threshold=float(raw.get("extremum_threshold", setting("defaults", "extremum_threshold", 3.0))),
            offset=float(offset) if offset is not None else None,
            rounding=rounding,
            policy=_parse_policy(raw.get("policy", setting("defaults", "policy", "balanced"))),
            seed=int(overrides.get("seed", raw.get("seed", setting("defaults", "seed", 0)))),
            redistribution_mode=redistribution,
            strict=bool(raw.get("strict", False)),
            deviation_factor=float(setting("verify", "deviation_factor", 0.5)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, GroupAnonymityError):
            raise
        raise ConfigError(f"invalid value in {path}: {e}") from e

    if config.uses_microfile and config.output_path is None:
        config = replace(config, output_path=out_dir / f"{name}.masked.csv")
    logger.debug("Loaded run config %s (%s mode)", name, mode)
    return config
