"""
Build quantity, concentration and concentration-difference signals from a
microfile and a group specification.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import FrozenSet, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from engine.errors import (
    DivisorZero,
    InvalidGroupSpec,
    LabelMismatch,
    UnknownAttribute,
    UnknownParameterValue,
)
from engine.wavelet_engine import CONCENTRATION, DIFFERENCE, QUANTITY, Signal, as_vector

logger = logging.getLogger(__name__)


def compile_values(values):
    """
    Expand one attribute's allowed values into a tuple of strings.

    Args:
        values: list of codes, a single code, or {"min": a, "max": b}
                for an inclusive integer range (e.g. a derived "young" age band)
    """
    if isinstance(values, Mapping):
        if set(values) != {'min', 'max'}:
            raise InvalidGroupSpec(f"a value range needs exactly 'min' and 'max', got {sorted(values)}")
        low, high = int(values['min']), int(values['max'])
        if low > high:
            raise InvalidGroupSpec(f"empty value range {low}..{high}")
        return tuple(str(v) for v in range(low, high + 1))
    if isinstance(values, (list, tuple)):
        return tuple(str(v) for v in values)
    return (str(values),)


def compile_combinations(value_sets):
    """Cartesian product of per-attribute value sets -> (attrs, combinations)."""
    attrs = tuple(str(name) for name in value_sets)
    expanded = [compile_values(value_sets[name]) for name in value_sets]
    return attrs, frozenset(itertools.product(*expanded))


@dataclass(frozen=True)
class GroupSpec:
    vital_attrs: Tuple[str, ...]
    vital_combinations: FrozenSet[Tuple[str, ...]]
    parameter_attr: str
    parameter_values: Tuple[str, ...]
    denominator_attrs: Optional[Tuple[str, ...]] = None
    denominator_combinations: Optional[FrozenSet[Tuple[str, ...]]] = None

    def __post_init__(self):
        object.__setattr__(self, 'vital_attrs', tuple(self.vital_attrs))
        object.__setattr__(self, 'vital_combinations',
                           frozenset(tuple(str(v) for v in combo) for combo in self.vital_combinations))
        object.__setattr__(self, 'parameter_values', tuple(str(v) for v in self.parameter_values))

        if not self.vital_attrs:
            raise InvalidGroupSpec("at least one vital attribute is required")
        if self.parameter_attr in self.vital_attrs:
            raise InvalidGroupSpec(f"parameter attribute {self.parameter_attr!r} cannot also be vital")
        if not self.parameter_values:
            raise InvalidGroupSpec("parameter values must not be empty")
        if len(set(self.parameter_values)) != len(self.parameter_values):
            raise InvalidGroupSpec("parameter values must be distinct")
        for combo in self.vital_combinations:
            if len(combo) != len(self.vital_attrs):
                raise InvalidGroupSpec(f"vital combination {combo} does not match attributes {self.vital_attrs}")

        if (self.denominator_attrs is None) != (self.denominator_combinations is None):
            raise InvalidGroupSpec("denominator attributes and combinations go together")
        if self.denominator_attrs is not None:
            object.__setattr__(self, 'denominator_attrs', tuple(self.denominator_attrs))
            object.__setattr__(self, 'denominator_combinations',
                               frozenset(tuple(str(v) for v in c) for c in self.denominator_combinations))
            if self.parameter_attr in self.denominator_attrs:
                raise InvalidGroupSpec("parameter attribute cannot define the denominator group")
            self._check_nested()

    def _check_nested(self):
        # Every vital tuple, projected on the denominator attributes, must be a denominator tuple.
        # Nesting over attributes the vital set does not constrain can only be checked on data.
        if any(a not in self.vital_attrs for a in self.denominator_attrs):
            logger.debug("Denominator %s not covered by vital attributes; nesting unchecked",
                         self.denominator_attrs)
            return
        positions = [self.vital_attrs.index(a) for a in self.denominator_attrs]
        for combo in self.vital_combinations:
            projected = tuple(combo[p] for p in positions)
            if projected not in self.denominator_combinations:
                raise InvalidGroupSpec(f"vital combination {combo} lies outside the denominator group")

    @property
    def attributes(self):
        attrs = list(self.vital_attrs) + [self.parameter_attr]
        if self.denominator_attrs:
            attrs.extend(a for a in self.denominator_attrs if a not in attrs)
        return attrs


@dataclass(frozen=True)
class PairedGroupSpec:
    main: GroupSpec
    subordinate: GroupSpec

    def __post_init__(self):
        if self.main.parameter_attr != self.subordinate.parameter_attr:
            raise InvalidGroupSpec("main and subordinate groups must share the parameter attribute")
        if self.main.parameter_values != self.subordinate.parameter_values:
            raise InvalidGroupSpec("main and subordinate groups must share the parameter ordering")
        if (self.main.denominator_attrs, self.main.denominator_combinations) != (
            self.subordinate.denominator_attrs,
            self.subordinate.denominator_combinations,
        ):
            raise InvalidGroupSpec("main and subordinate groups must share the denominator rule")


def group_mask(records: pd.DataFrame, attrs, combinations) -> np.ndarray:
    """Boolean selector of records whose values over attrs form one of the combinations."""
    if len(records) == 0 or not combinations:
        return np.zeros(len(records), dtype=bool)
    attrs = list(attrs)
    if len(attrs) == 1:
        return records[attrs[0]].isin([combo[0] for combo in combinations]).to_numpy()
    keys = pd.MultiIndex.from_frame(records[attrs])
    return np.asarray(keys.isin(list(combinations)), dtype=bool)


def denominator_mask(records: pd.DataFrame, spec: GroupSpec) -> np.ndarray:
    if spec.denominator_attrs is None:
        return np.ones(len(records), dtype=bool)
    return group_mask(records, spec.denominator_attrs, spec.denominator_combinations)


def _require_attributes(mf, spec):
    missing = [a for a in spec.attributes if a not in mf.schema]
    if missing:
        raise UnknownAttribute(f"attributes not in microfile schema: {', '.join(missing)}")


def _count_by_parameter(mf, spec, selector, strict):
    column = mf.records[spec.parameter_attr]
    if strict:
        present = set(column.unique())
        absent = [v for v in spec.parameter_values if v not in present]
        if absent:
            raise UnknownParameterValue(
                f"parameter values not found in {spec.parameter_attr!r}: {', '.join(absent)}"
            )
    counts = column[selector].value_counts()
    vector = counts.reindex(list(spec.parameter_values), fill_value=0).to_numpy(dtype=np.int64)
    return Signal(vector, spec.parameter_values, QUANTITY)


def build_quantity_signal(mf, spec: GroupSpec, strict=False) -> Signal:
    """Count vital-group records per parameter value."""
    _require_attributes(mf, spec)
    selector = group_mask(mf.records, spec.vital_attrs, spec.vital_combinations)
    return _count_by_parameter(mf, spec, selector, strict)


def build_group_totals(mf, spec: GroupSpec, strict=False) -> Signal:
    """Count denominator-group records per parameter value (all records when no denominator is set)."""
    _require_attributes(mf, spec)
    return _count_by_parameter(mf, spec, denominator_mask(mf.records, spec), strict)


def _labels_of(*signals):
    labels = [s.labels for s in signals if isinstance(s, Signal)]
    if any(l != labels[0] for l in labels[1:]):
        raise LabelMismatch("signals are indexed by different parameter values")
    return labels[0] if labels else None


def build_concentration_signal(q, totals) -> Signal:
    labels = _labels_of(q, totals)
    counts, denominators = as_vector(q), as_vector(totals)
    if counts.size != denominators.size:
        raise LabelMismatch(f"quantity has {counts.size} buckets, totals have {denominators.size}")
    labels = labels or tuple(str(i) for i in range(counts.size))

    bad = np.flatnonzero((denominators == 0) & (counts > 0))
    if bad.size:
        raise DivisorZero(f"zero total with non-zero count at parameter value(s) {[labels[i] for i in bad]}")
    empty = np.flatnonzero((denominators == 0) & (counts == 0))
    if empty.size:
        logger.warning("Empty buckets %s: concentration set to 0", [labels[i] for i in empty])

    values = np.divide(counts, denominators, out=np.zeros(counts.size), where=denominators != 0)
    return Signal(values, labels, CONCENTRATION)


def build_difference_signal(c1, c2) -> Signal:
    labels = _labels_of(c1, c2)
    first, second = as_vector(c1), as_vector(c2)
    if first.size != second.size:
        raise LabelMismatch(f"cannot subtract signals of length {first.size} and {second.size}")
    labels = labels or tuple(str(i) for i in range(first.size))
    return Signal(first - second, labels, DIFFERENCE)
