"""
Group-anonymity masking procedures.

All three pipelines swap the level-k approximation coefficients of a signal
for new ones and add the old details back. Afterwards each one restores what
the data must satisfy: non-negative values, the original total, and integer
counts. Details survive up to a common factor, which is reported as
detail_ratio.

    quantity:       q  -> q^ = WRM a^ + sum D -> offset -> rescale to sum q -> round
    concentration:  c = q / t -> c^ -> offset -> q^ = c^ t -> rescale -> round
    difference:     delta = c1 - c2 -> delta^ -> solve (c1^, c2^) -> q^ = c^ t -> rescale each -> round
"""
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np

from engine.errors import (
    ConfigError,
    DimensionMismatch,
    GroupAnonymityError,
    InvalidTargets,
    LabelMismatch,
    LengthMismatch,
    NegativeConcentration,
    NonPositiveSum,
    OffsetTooSmall,
)
from engine.signal_builder import build_concentration_signal, build_difference_signal
from engine.strategy_loader import builtin_strategy_path, load_strategy
from engine.wavelet_engine import (
    CONCENTRATION,
    DIFFERENCE,
    QUANTITY,
    Signal,
    as_vector,
    build_wrm,
    decompose,
    reconstruct_approx,
)

logger = logging.getLogger(__name__)

STRATEGY_KINDS = ('manual', 'leveling', 'permutation', 'custom')
ROUNDING_MODES = ('nearest', 'sum_preserving')
SOLVE_POLICIES = ('adjust_main', 'adjust_subordinate', 'alternate', 'balanced')
SIDE_CHOICES = ('main', 'subordinate', 'balanced')
DEFAULT_EXTREMUM_THRESHOLD = 3.0
FIDELITY_TOLERANCE = 1e-6


def normalize_choice(value):
    return str(value).strip().lower().replace('-', '_')


@dataclass(frozen=True)
class MaskingStrategy:
    """How new approximation coefficients are proposed."""

    kind: str
    manual_coeffs: Optional[Tuple[float, ...]] = None
    targets: Optional[Tuple[int, ...]] = None
    strength: float = 1.0
    path: Optional[str] = None
    options: Optional[Mapping[str, Any]] = None

    def __post_init__(self):
        kind = normalize_choice(self.kind)
        object.__setattr__(self, 'kind', kind)
        if kind not in STRATEGY_KINDS:
            raise ConfigError(f"strategy kind must be one of {', '.join(STRATEGY_KINDS)}, got {self.kind!r}")
        if kind == 'manual':
            if self.manual_coeffs is None or len(self.manual_coeffs) == 0:
                raise ConfigError("manual strategy requires coefficients")
            object.__setattr__(self, 'manual_coeffs', tuple(float(c) for c in self.manual_coeffs))
        if self.targets is not None:
            targets = tuple(int(t) for t in self.targets)
            if len(set(targets)) != len(targets) or any(t < 0 for t in targets):
                raise InvalidTargets(f"targets must be distinct non-negative indices, got {list(targets)}")
            object.__setattr__(self, 'targets', targets)
        if not 0.0 <= float(self.strength) <= 1.0:
            raise ConfigError(f"strength must lie in [0, 1], got {self.strength}")
        if kind == 'custom' and not self.path:
            raise ConfigError("custom strategy requires a path to a .py file")

    def load(self):
        if self.kind == 'manual':
            return load_strategy(builtin_strategy_path('manual'), {'coefficients': self.manual_coeffs})
        if self.kind == 'leveling':
            return load_strategy(builtin_strategy_path('leveling'), {'strength': self.strength})
        if self.kind == 'permutation':
            return load_strategy(builtin_strategy_path('permutation'), {'targets': list(self.targets or ())})
        return load_strategy(self.path, dict(self.options or {}))

    def describe(self):
        described = {'kind': self.kind}
        if self.manual_coeffs is not None:
            described['coefficients'] = [float(c) for c in self.manual_coeffs]
        if self.targets is not None:
            described['targets'] = [int(t) for t in self.targets]
        if self.kind == 'leveling':
            described['strength'] = float(self.strength)
        if self.kind == 'custom':
            described['path'] = str(self.path)
            described['options'] = dict(self.options or {})
        return described


@dataclass(frozen=True, eq=False)
class MaskingResult:
    flavor: str
    labels: Tuple[str, ...]
    original: np.ndarray
    original_coeffs: np.ndarray
    new_coeffs: np.ndarray
    new_approx: np.ndarray
    raw_masked: np.ndarray
    offset: float
    scale: float
    masked_real: np.ndarray
    masked_int: np.ndarray
    detail_ratio: float
    max_detail_deviation: float
    extrema: Tuple[int, ...]
    rounding: str
    solved_concentration: Optional[np.ndarray] = None

    def masked_signal(self) -> Signal:
        return Signal(self.masked_int, self.labels, QUANTITY)


def _labels_for(signal, size):
    if isinstance(signal, Signal):
        return signal.labels
    return tuple(str(i) for i in range(size))


def _zero_tolerance(values):
    return 1e-9 * max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)


def detect_extrema(values, threshold=DEFAULT_EXTREMUM_THRESHOLD):
    """
    Indices lying more than threshold x MAD away from the median.

    With a zero MAD any value off the median counts as extremal.
    """
    v = as_vector(values)
    spread = np.abs(v - np.median(v))
    mad = np.median(spread)
    if mad == 0:
        flagged = np.flatnonzero(spread > 0)
    else:
        flagged = np.flatnonzero(spread > threshold * mad)
    return [int(i) for i in flagged]


def propose_coefficients(approx_coeffs, strategy: MaskingStrategy, extrema):
    coeffs = as_vector(approx_coeffs)
    extrema = sorted(int(i) for i in extrema)
    invalid = [i for i in extrema if not 0 <= i < coeffs.size]
    if invalid:
        raise InvalidTargets(f"extremum indices {invalid} are outside 0..{coeffs.size - 1}")

    proposed = strategy.load().propose_coefficients(coeffs.copy(), extrema)
    proposed = np.asarray(proposed, dtype=np.float64).ravel()
    if proposed.size != coeffs.size:
        raise LengthMismatch(f"strategy returned {proposed.size} coefficients, expected {coeffs.size}")
    if not np.all(np.isfinite(proposed)):
        raise GroupAnonymityError("strategy returned non-finite coefficients")
    return proposed


def compose_masked_signal(decomposition, new_coeffs):
    """New approximation from the WRM plus every old detail."""
    new_coeffs = as_vector(new_coeffs)
    if new_coeffs.size != decomposition.approx_coeffs.size:
        raise DimensionMismatch(
            f"expected {decomposition.approx_coeffs.size} coefficients, got {new_coeffs.size}"
        )
    wrm = build_wrm(decomposition.wavelet, decomposition.level, decomposition.signal_len)
    return reconstruct_approx(new_coeffs, wrm) + np.sum(decomposition.details, axis=0)


def offset_to_nonnegative(values, requested=None):
    """
    Shift a vector so that it is non-negative.

    Args:
        values: raw masked vector
        requested: explicit non-positive offset (e.g. -800); None picks
                   min(0, floor(min(values)))

    Returns:
        (values - offset, offset)
    """
    v = as_vector(values)
    tolerance = _zero_tolerance(v)
    lowest = float(v.min())
    if requested is None:
        offset = 0.0 if lowest >= -tolerance else float(min(0.0, np.floor(lowest)))
    else:
        offset = float(requested)
        if offset > 0:
            raise OffsetTooSmall(f"offset must be zero or negative, got {offset}")

    shifted = v - offset
    if shifted.min() < -tolerance:
        raise OffsetTooSmall(
            f"offset {offset} leaves a minimum of {shifted.min():.4f}; use {np.floor(lowest):.0f} or lower"
        )
    return np.clip(shifted, 0.0, None), offset


def rescale_to_sum(values, target_sum):
    v = as_vector(values)
    total = float(v.sum())
    if total <= 0:
        raise NonPositiveSum(f"cannot rescale a vector summing to {total}")
    if target_sum <= 0:
        raise NonPositiveSum(f"target sum must be positive, got {target_sum}")
    scale = float(target_sum) / total
    return v * scale, scale


def round_signal(values, mode='nearest'):
    """
    Round to integers.

    nearest rounds half away from zero; sum_preserving floors everything and
    hands the missing units to the largest remainders (lower index wins ties)
    so the result sums to round(sum(values)).
    """
    mode = normalize_choice(mode)
    if mode not in ROUNDING_MODES:
        raise ConfigError(f"rounding must be one of {', '.join(ROUNDING_MODES)}, got {mode!r}")
    v = as_vector(values)
    if v.size and v.min() < -_zero_tolerance(v):
        raise GroupAnonymityError("rounding expects non-negative values")

    if mode == 'nearest':
        return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)

    total = int(np.floor(v.sum() + 0.5))
    floors = np.floor(v)
    shortfall = total - int(floors.sum())
    order = np.argsort(-(v - floors), kind='stable')
    rounded = floors.astype(np.int64)
    rounded[order[:shortfall]] += 1
    return rounded


def verify_detail_fidelity(original, masked_real, f, level):
    """
    Least-squares ratio between masked and original details over levels 1..k.

    Returns:
        (ratio, max |D~ - ratio * D|); ratio is 1 when the original has no detail
    """
    before, after = as_vector(original), as_vector(masked_real)
    if before.size != after.size:
        raise DimensionMismatch(f"signals differ in length: {before.size} vs {after.size}")
    d_before = np.concatenate(decompose(before, f, level).details)
    d_after = np.concatenate(decompose(after, f, level).details)

    if np.max(np.abs(d_before)) <= 1e-12 * max(1.0, float(np.max(np.abs(before)))):
        logger.warning("Original signal has no detail; fidelity ratio reported as 1")
        return 1.0, float(np.max(np.abs(d_after)))

    ratio = float(d_after @ d_before / (d_before @ d_before))
    return ratio, float(np.max(np.abs(d_after - ratio * d_before)))


def _mask_approximation(values, f, level, strategy, extrema, threshold):
    decomposition = decompose(values, f, level)
    if extrema is None:
        extrema = detect_extrema(decomposition.approx_coeffs, threshold)
        if not extrema:
            logger.warning("No extremal approximation coefficients found at threshold %.2f", threshold)
    new_coeffs = propose_coefficients(decomposition.approx_coeffs, strategy, extrema)
    wrm = build_wrm(f, level, decomposition.signal_len)
    new_approx = reconstruct_approx(new_coeffs, wrm)
    raw = compose_masked_signal(decomposition, new_coeffs)
    logger.info("Replaced %d approximation coefficients (extrema %s)", new_coeffs.size, list(extrema))
    return decomposition, tuple(int(i) for i in extrema), new_coeffs, new_approx, raw


def _check_proportional(ratio, scale, deviation, decomposition):
    bound = FIDELITY_TOLERANCE * max(1.0, float(np.max(np.abs(np.concatenate(decomposition.details)))))
    if abs(ratio - scale) > FIDELITY_TOLERANCE * max(1.0, abs(scale)) or deviation > bound:
        logger.warning("Details drifted from proportionality: ratio %.6f, scale %.6f, deviation %.3g",
                       ratio, scale, deviation)


def mask_quantity(q, f, level, strategy, offset=None, rounding='nearest', extrema=None,
                  extremum_threshold=DEFAULT_EXTREMUM_THRESHOLD):
    """Quantity problem: mask the distribution of counts directly."""
    if isinstance(q, Signal) and q.flavor != QUANTITY:
        raise GroupAnonymityError(f"mask_quantity needs a quantity signal, got {q.flavor}")
    counts = as_vector(q)
    decomposition, extrema, new_coeffs, new_approx, raw = _mask_approximation(
        counts, f, level, strategy, extrema, extremum_threshold
    )
    shifted, applied_offset = offset_to_nonnegative(raw, offset)
    masked_real, scale = rescale_to_sum(shifted, counts.sum())
    masked_int = round_signal(masked_real, rounding)
    ratio, deviation = verify_detail_fidelity(counts, masked_real, f, level)
    _check_proportional(ratio, scale, deviation, decomposition)

    return MaskingResult(
        flavor=QUANTITY,
        labels=_labels_for(q, counts.size),
        original=counts,
        original_coeffs=decomposition.approx_coeffs,
        new_coeffs=new_coeffs,
        new_approx=new_approx,
        raw_masked=raw,
        offset=applied_offset,
        scale=scale,
        masked_real=masked_real,
        masked_int=masked_int,
        detail_ratio=ratio,
        max_detail_deviation=deviation,
        extrema=extrema,
        rounding=normalize_choice(rounding),
    )


def mask_concentration(q, totals, f, level, strategy, offset=None, rounding='nearest', extrema=None,
                       extremum_threshold=DEFAULT_EXTREMUM_THRESHOLD):
    """Concentration problem: mask q / totals, leaving totals untouched."""
    concentration = build_concentration_signal(q, totals)
    counts, denominators = as_vector(q), as_vector(totals)
    decomposition, extrema, new_coeffs, new_approx, raw = _mask_approximation(
        concentration.values, f, level, strategy, extrema, extremum_threshold
    )
    shifted, applied_offset = offset_to_nonnegative(raw, offset)
    masked_real, scale = rescale_to_sum(shifted * denominators, counts.sum())
    masked_int = round_signal(masked_real, rounding)

    masked_concentration = np.divide(masked_real, denominators, out=np.zeros(counts.size),
                                     where=denominators != 0)
    ratio, deviation = verify_detail_fidelity(concentration.values, masked_concentration, f, level)
    _check_proportional(ratio, scale, deviation, decomposition)

    return MaskingResult(
        flavor=CONCENTRATION,
        labels=concentration.labels,
        original=counts,
        original_coeffs=decomposition.approx_coeffs,
        new_coeffs=new_coeffs,
        new_approx=new_approx,
        raw_masked=raw,
        offset=applied_offset,
        scale=scale,
        masked_real=masked_real,
        masked_int=masked_int,
        detail_ratio=ratio,
        max_detail_deviation=deviation,
        extrema=extrema,
        rounding=normalize_choice(rounding),
    )


def _policy_sides(policy, size):
    if isinstance(policy, str):
        policy = normalize_choice(policy)
        if policy not in SOLVE_POLICIES:
            raise ConfigError(f"solve policy must be one of {', '.join(SOLVE_POLICIES)} or a per-index list")
        if policy == 'adjust_main':
            return ['main'] * size
        if policy == 'adjust_subordinate':
            return ['subordinate'] * size
        if policy == 'alternate':
            return ['main' if i % 2 == 0 else 'subordinate' for i in range(size)]
        return ['balanced'] * size

    sides = [normalize_choice(side) for side in policy]
    if len(sides) != size:
        raise LengthMismatch(f"per-index solve policy has {len(sides)} entries for {size} buckets")
    unknown = sorted({side for side in sides if side not in SIDE_CHOICES})
    if unknown:
        raise ConfigError(f"per-index solve policy entries must be main/subordinate/balanced, got {unknown}")
    return sides


def solve_concentration_pair(delta_hat, c1, c2, policy='balanced'):
    """
    Pick (c1^, c2^) with c1^ - c2^ = delta^.

    The change D = delta^ - (c1 - c2) is absorbed per index by the main side
    (c1 += D), the subordinate side (c2 -= D) or both (D / 2 each).
    """
    target, first, second = as_vector(delta_hat), as_vector(c1), as_vector(c2)
    if not target.size == first.size == second.size:
        raise LabelMismatch(f"lengths differ: {target.size}, {first.size}, {second.size}")
    labels = next((s.labels for s in (c1, c2, delta_hat) if isinstance(s, Signal)), None)
    labels = labels or tuple(str(i) for i in range(first.size))

    sides = np.array(_policy_sides(policy, first.size))
    main_share = np.where(sides == 'main', 1.0, np.where(sides == 'balanced', 0.5, 0.0))
    change = target - (first - second)
    c1_hat = first + main_share * change
    c2_hat = second - (1.0 - main_share) * change

    negative = np.flatnonzero((c1_hat < -1e-12) | (c2_hat < -1e-12))
    if negative.size:
        where = ", ".join(f"{labels[i]} ({sides[i]})" for i in negative)
        raise NegativeConcentration(
            f"policy drives a concentration below zero at {where}; adjust the other side there"
        )
    return Signal(c1_hat, labels, CONCENTRATION), Signal(c2_hat, labels, CONCENTRATION)


def mask_difference(q1, q2, totals, f, level, strategy, policy='balanced', rounding='nearest',
                    extrema=None, extremum_threshold=DEFAULT_EXTREMUM_THRESHOLD):
    """
    Concentration difference problem for a main/subordinate pair.

    Differences may be negative, so there is no offset step. Fidelity is
    measured between delta and delta^, since the two sides are rescaled by
    different factors.

    Returns:
        (main result, subordinate result)
    """
    c1 = build_concentration_signal(q1, totals)
    c2 = build_concentration_signal(q2, totals)
    delta = build_difference_signal(c1, c2)
    denominators = as_vector(totals)

    decomposition, extrema, new_coeffs, new_approx, raw = _mask_approximation(
        delta.values, f, level, strategy, extrema, extremum_threshold
    )
    c1_hat, c2_hat = solve_concentration_pair(raw, c1, c2, policy)
    ratio, deviation = verify_detail_fidelity(delta.values, raw, f, level)

    results = []
    for counts, solved in ((as_vector(q1), c1_hat), (as_vector(q2), c2_hat)):
        masked_real, scale = rescale_to_sum(solved.values * denominators, counts.sum())
        results.append(MaskingResult(
            flavor=DIFFERENCE,
            labels=delta.labels,
            original=counts,
            original_coeffs=decomposition.approx_coeffs,
            new_coeffs=new_coeffs,
            new_approx=new_approx,
            raw_masked=raw,
            offset=0.0,
            scale=scale,
            masked_real=masked_real,
            masked_int=round_signal(masked_real, rounding),
            detail_ratio=ratio,
            max_detail_deviation=deviation,
            extrema=extrema,
            rounding=normalize_choice(rounding),
            solved_concentration=np.array(solved.values),
        ))
    return results[0], results[1]
