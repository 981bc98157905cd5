"""
Microfile persistence and redistribution.

A microfile is a table of records x categorical attributes, kept as verbatim
strings. Masked signals are realized by editing only the parameter attribute
of chosen records; nothing is ever created or deleted.
"""
import csv
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from engine.errors import (
    ConfigError,
    DuplicateAttribute,
    InfeasibleTarget,
    MalformedRow,
    MicrofileIOError,
    NegativeTarget,
    SchemaMismatch,
    StalePlan,
)
from engine.signal_builder import (
    build_group_totals,
    build_quantity_signal,
    denominator_mask,
    group_mask,
)
from engine.wavelet_engine import as_vector
from utils.file_io import write_atomic

logger = logging.getLogger(__name__)

FREE = "free"
DENOMINATOR_PRESERVING = "denominator_preserving"
REDISTRIBUTION_MODES = (FREE, DENOMINATOR_PRESERVING)


@dataclass(frozen=True, eq=False)
class Microfile:
    schema: Tuple[str, ...]
    records: pd.DataFrame
    source_path: Optional[str] = None
    loaded_at: Optional[str] = None

    def __post_init__(self):
        schema = tuple(str(name) for name in self.schema)
        duplicates = sorted(name for name, n in Counter(schema).items() if n > 1)
        if duplicates:
            raise DuplicateAttribute(f"duplicate attribute names: {', '.join(duplicates)}")
        if tuple(self.records.columns) != schema:
            raise SchemaMismatch("record columns do not match the schema")
        object.__setattr__(self, "schema", schema)

    @classmethod
    def from_rows(cls, schema, rows, source_path=None):
        records = pd.DataFrame([list(map(str, row)) for row in rows], columns=list(schema), dtype=object)
        return cls(tuple(schema), records.reset_index(drop=True), source_path=source_path)

    @property
    def record_count(self):
        return len(self.records)

    @property
    def provenance(self):
        return {"source_path": self.source_path, "loaded_at": self.loaded_at}

    def same_content(self, other):
        return self.schema == other.schema and self.records.equals(other.records)


class Move(NamedTuple):
    record_index: int
    attribute: str
    old_value: str
    new_value: str
    role: str


@dataclass(frozen=True)
class SwapPlan:
    moves: Tuple[Move, ...]
    deltas: Mapping[str, int]
    mode: str = FREE

    @property
    def vital_moves(self):
        return sum(1 for move in self.moves if move.role == "vital")

    @property
    def partner_moves(self):
        return sum(1 for move in self.moves if move.role == "partner")


@dataclass(frozen=True)
class AuditReport:
    record_count_before: int
    record_count_after: int
    vital_before: Tuple[int, ...]
    vital_after: Tuple[int, ...]
    mismatched_buckets: Tuple[Tuple[str, int, int], ...] = ()
    denominator_checked: bool = False
    denominator_changes: Tuple[Tuple[str, int, int], ...] = ()
    edited_attributes: Optional[Tuple[str, ...]] = None
    edited_records: Optional[int] = None
    failures: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def passed(self):
        return not self.failures

    def as_dict(self):
        return {
            "passed": self.passed,
            "record_count_before": self.record_count_before,
            "record_count_after": self.record_count_after,
            "vital_before": list(self.vital_before),
            "vital_after": list(self.vital_after),
            "denominator_checked": self.denominator_checked,
            "edited_attributes": None if self.edited_attributes is None else list(self.edited_attributes),
            "edited_records": self.edited_records,
            "failures": list(self.failures),
        }


def _check_field_counts(path, encoding, delimiter, width):
    # pandas pads short rows with empty cells once NA parsing is off, so widths are checked here
    with open(path, "r", encoding=encoding, newline="") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        next(reader, None)
        for row in reader:
            if row and len(row) != width:
                raise MalformedRow(reader.line_num, f"expected {width} fields, found {len(row)}")


def load_csv(path, encoding="utf-8", delimiter=","):
    """
    Load a microfile from a delimited file with a header row.

    All values are kept as verbatim strings.

    Raises:
        MicrofileIOError: file missing or unreadable
        MalformedRow: a row has the wrong number of fields (line number attached)
        DuplicateAttribute: repeated header names
    """
    read_options = dict(sep=delimiter, dtype=str, keep_default_na=False, encoding=encoding)
    try:
        header = pd.read_csv(path, header=None, nrows=1, **read_options)
        schema = tuple(str(name) for name in header.iloc[0].tolist())
        duplicates = sorted(name for name, n in Counter(schema).items() if n > 1)
        if duplicates:
            raise DuplicateAttribute(f"duplicate attribute names in {path}: {', '.join(duplicates)}")
        _check_field_counts(path, encoding, delimiter, len(schema))
        records = pd.read_csv(path, header=0, **read_options)
    except pd.errors.EmptyDataError as e:
        raise MalformedRow(1, "missing header row") from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise MalformedRow(int(match.group(1)) if match else None, str(e)) from e
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise MicrofileIOError(f"Could not read microfile {path}: {e}") from e

    records.columns = list(schema)
    records = records.astype(object).reset_index(drop=True)
    loaded_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    logger.info("Loaded %d records x %d attributes from %s", len(records), len(schema), path)
    return Microfile(schema, records, source_path=str(path), loaded_at=loaded_at)


def save_csv(mf: Microfile, path):
    """Write the microfile atomically; column order and cell text are preserved."""
    write_atomic(path, lambda tmp: mf.records.to_csv(tmp, index=False, lineterminator="\n", encoding="utf-8"))
    logger.info("Saved %d records to %s", mf.record_count, path)


def _target_vector(target, spec):
    wanted = as_vector(target)
    if wanted.size != len(spec.parameter_values):
        raise InfeasibleTarget(f"target has {wanted.size} buckets, the group has {len(spec.parameter_values)}")
    negative = [spec.parameter_values[i] for i in np.flatnonzero(wanted < 0)]
    if negative:
        raise NegativeTarget(f"negative target count for bucket(s) {', '.join(negative)}")
    if np.any(wanted != np.round(wanted)):
        raise InfeasibleTarget("target counts must be whole numbers")
    return wanted.astype(np.int64)


def plan_redistribution(mf: Microfile, spec, target, mode=FREE, seed=0, frozen: Sequence = ()):
    """
    Plan parameter-value edits that turn the group's quantity signal into target.

    Free mode moves surplus vital records into deficit buckets. Denominator
    preserving mode pairs each such move with a non-vital member of the
    denominator group travelling the other way, so every bucket's denominator
    total stays put. Records matching a frozen group are never touched.

    Args:
        mf: source microfile
        spec: GroupSpec of the group being redistributed
        target: integer Signal or vector, same ordering as spec.parameter_values
        mode: "free" or "denominator_preserving"
        seed: seed for the record-choice generator
        frozen: GroupSpecs whose vital records must stay where they are

    Returns:
        SwapPlan
    """
    mode = str(mode).replace("-", "_")
    if mode not in REDISTRIBUTION_MODES:
        raise ConfigError(f"redistribution mode must be one of {', '.join(REDISTRIBUTION_MODES)}, got {mode!r}")

    wanted = _target_vector(target, spec)
    current = build_quantity_signal(mf, spec).values.astype(np.int64)
    if wanted.sum() != current.sum():
        raise InfeasibleTarget(
            f"target total {wanted.sum()} differs from the current vital total {current.sum()}; "
            "records can only be redistributed, not created or removed"
        )
    deltas = wanted - current
    labels = spec.parameter_values

    records = mf.records
    attribute = spec.parameter_attr
    bucket_of = records[attribute].to_numpy(dtype=object)
    vital = group_mask(records, spec.vital_attrs, spec.vital_combinations)
    locked = np.zeros(len(records), dtype=bool)
    for other in frozen:
        locked |= group_mask(records, other.vital_attrs, other.vital_combinations)

    rng = np.random.default_rng(seed)

    donors = []
    for label, delta in zip(labels, deltas):
        if delta >= 0:
            continue
        pool = np.flatnonzero(vital & ~locked & (bucket_of == label))
        if pool.size < -delta:
            raise InfeasibleTarget(
                f"bucket {label} must shed {-delta} records but only {pool.size} are movable", bucket=label
            )
        donors.extend(int(i) for i in np.sort(rng.choice(pool, size=int(-delta), replace=False)))

    slots = [label for label, delta in zip(labels, deltas) for _ in range(max(int(delta), 0))]
    order = rng.permutation(len(donors))
    moves = [
        Move(donors[j], attribute, bucket_of[donors[j]], slot, "vital")
        for j, slot in zip(order, slots)
    ]

    if mode == DENOMINATOR_PRESERVING:
        moves.extend(_partner_moves(records, spec, moves, vital, locked, bucket_of, rng))

    moves.sort(key=lambda move: move.record_index)
    plan = SwapPlan(tuple(moves), {label: int(d) for label, d in zip(labels, deltas)}, mode)
    logger.info("Planned %d vital and %d partner moves (%s)", plan.vital_moves, plan.partner_moves, mode)
    return plan


def _partner_moves(records, spec, vital_moves, vital, locked, bucket_of, rng):
    in_denominator = denominator_mask(records, spec)
    needing = [move for move in vital_moves if in_denominator[move.record_index]]
    needed = Counter(move.new_value for move in needing)

    pools = {}
    for label in spec.parameter_values:
        if not needed[label]:
            continue
        candidates = np.flatnonzero(~vital & ~locked & in_denominator & (bucket_of == label))
        if candidates.size < needed[label]:
            raise InfeasibleTarget(
                f"bucket {label} has only {candidates.size} non-vital denominator records to exchange, "
                f"needs {needed[label]}",
                bucket=label,
            )
        pools[label] = iter(rng.permutation(candidates).tolist())

    return [
        Move(int(next(pools[move.new_value])), move.attribute, move.new_value, move.old_value, "partner")
        for move in needing
    ]


def apply_plan(mf: Microfile, plan: SwapPlan) -> Microfile:
    """Return a new microfile with the plan's moves applied."""
    records = mf.records.copy()
    by_attribute = defaultdict(list)
    for move in plan.moves:
        by_attribute[move.attribute].append(move)

    for attribute, moves in by_attribute.items():
        if attribute not in mf.schema:
            raise StalePlan(f"plan edits unknown attribute {attribute!r}")
        index = np.array([move.record_index for move in moves], dtype=np.int64)
        outside = index[(index < 0) | (index >= len(records))]
        if outside.size:
            raise StalePlan(f"plan refers to missing record {int(outside[0])}")

        column = records[attribute].to_numpy(dtype=object, copy=True)
        expected = np.array([move.old_value for move in moves], dtype=object)
        stale = np.flatnonzero(column[index] != expected)
        if stale.size:
            move = moves[stale[0]]
            raise StalePlan(
                f"record {move.record_index} has {attribute}={column[move.record_index]!r}, "
                f"plan expected {move.old_value!r}"
            )
        column[index] = [move.new_value for move in moves]
        records[attribute] = pd.Series(column, index=records.index, dtype=object)

    return Microfile(mf.schema, records, source_path=mf.source_path, loaded_at=mf.loaded_at)


def audit(before: Microfile, after: Microfile, spec, target=None, check_denominator=False) -> AuditReport:
    """Check a rewrite against the group's postconditions; failures are listed, never raised."""
    if before.schema != after.schema:
        raise SchemaMismatch("microfiles have different schemas")

    failures = []
    labels = spec.parameter_values
    if before.record_count != after.record_count:
        failures.append(f"record count changed from {before.record_count} to {after.record_count}")

    vital_before = build_quantity_signal(before, spec).values.astype(np.int64)
    vital_after = build_quantity_signal(after, spec).values.astype(np.int64)
    if vital_before.sum() != vital_after.sum():
        failures.append(f"vital total changed from {vital_before.sum()} to {vital_after.sum()}")

    mismatched = []
    if target is not None:
        wanted = as_vector(target).astype(np.int64)
        for label, expected, actual in zip(labels, wanted, vital_after):
            if expected != actual:
                mismatched.append((label, int(expected), int(actual)))
                failures.append(f"bucket {label}: expected {expected} vital records, found {actual}")

    changes = []
    if check_denominator:
        totals_before = build_group_totals(before, spec).values.astype(np.int64)
        totals_after = build_group_totals(after, spec).values.astype(np.int64)
        for label, old, new in zip(labels, totals_before, totals_after):
            if old != new:
                changes.append((label, int(old), int(new)))
                failures.append(f"denominator of bucket {label} changed from {old} to {new}")

    edited_attributes = edited_records = None
    if before.record_count == after.record_count:
        differs = before.records.to_numpy(dtype=object) != after.records.to_numpy(dtype=object)
        edited_attributes = tuple(name for j, name in enumerate(before.schema) if differs[:, j].any())
        edited_records = int(differs.any(axis=1).sum()) if differs.size else 0
        stray = [name for name in edited_attributes if name != spec.parameter_attr]
        if stray:
            failures.append(f"attributes other than {spec.parameter_attr} were edited: {', '.join(stray)}")

    return AuditReport(
        record_count_before=before.record_count,
        record_count_after=after.record_count,
        vital_before=tuple(int(v) for v in vital_before),
        vital_after=tuple(int(v) for v in vital_after),
        mismatched_buckets=tuple(mismatched),
        denominator_checked=check_denominator,
        denominator_changes=tuple(changes),
        edited_attributes=edited_attributes,
        edited_records=edited_records,
        failures=tuple(failures),
    )
