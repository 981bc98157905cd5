"""
Orthogonal wavelet analysis of finite signals.

Periodic (circular) Daubechies filter banks of orders 1-10. Analysis keeps the
odd-indexed samples of the circular convolution, so for order 1 each
approximation coefficient is (s[2j] + s[2j+1]) / sqrt(2). A level-k decomposition
needs an even input at every level, so len(a_k) == len(s) / 2**k for all orders.
A standalone dwt_step on an odd-length input (orders > 1) repeats the last
sample first.

The reconstruction matrix (WRM) maps level-k approximation coefficients
straight to the level-k approximation and is built as a product of per-level
synthesis blocks, independently of the convolution kernels below.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
import pywt
from numba import njit

from engine.errors import (
    DimensionMismatch,
    GroupAnonymityError,
    LabelMismatch,
    LevelTooDeep,
    OddLengthUnsupported,
    SignalTooShort,
    UnsupportedFilter,
)

logger = logging.getLogger(__name__)

QUANTITY = 'quantity'
CONCENTRATION = 'concentration'
DIFFERENCE = 'difference'
FLAVORS = (QUANTITY, CONCENTRATION, DIFFERENCE)

MAX_ORDER = 10


def _readonly(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _quadrature_mirror(lo_d):
    length = len(lo_d)
    return np.array([(-1) ** i * lo_d[length - 1 - i] for i in range(length)])


@dataclass(frozen=True, eq=False)
class WaveletFilter:
    """Decomposition and reconstruction taps of one Daubechies filter."""

    order: int
    lo_d: np.ndarray
    hi_d: np.ndarray
    lo_r: np.ndarray
    hi_r: np.ndarray

    def __post_init__(self):
        for name in ('lo_d', 'hi_d', 'lo_r', 'hi_r'):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        expected = 2 * self.order
        for name in ('lo_d', 'hi_d', 'lo_r', 'hi_r'):
            if getattr(self, name).size != expected:
                raise UnsupportedFilter(f"{name} must have {expected} taps for order {self.order}")
        if abs(float(np.sum(self.lo_d ** 2)) - 1.0) > 1e-12:
            raise UnsupportedFilter("low-pass taps are not orthonormal")
        if not np.allclose(self.hi_d, _quadrature_mirror(self.lo_d), rtol=0.0, atol=1e-15):
            raise UnsupportedFilter("high-pass taps are not the quadrature mirror of the low-pass taps")

    @property
    def length(self):
        return self.lo_d.size

    @property
    def name(self):
        return f"db{self.order}"


@lru_cache(maxsize=None, typed=True)
def daubechies(order):
    """
    Build the Daubechies filter of the given order (1 = Haar).

    Low-pass taps come from PyWavelets; the high-pass filter follows
    hi_d[i] = (-1)**i * lo_d[L-1-i], which is (1/sqrt2, -1/sqrt2) for order 1.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise UnsupportedFilter(f"Daubechies order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    lo_d = np.array(pywt.Wavelet(f"db{int(order)}").dec_lo, dtype=np.float64)
    hi_d = _quadrature_mirror(lo_d)
    return WaveletFilter(order=int(order), lo_d=lo_d, hi_d=hi_d, lo_r=lo_d[::-1], hi_r=hi_d[::-1])


@dataclass(frozen=True, eq=False)
class Signal:
    """Ordered vector indexed by parameter values."""

    values: np.ndarray
    labels: Tuple[str, ...]
    flavor: str = QUANTITY

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise SignalTooShort("a signal needs at least one value")
        labels = tuple(str(label) for label in self.labels)
        if len(labels) != values.size:
            raise LabelMismatch(f"{len(labels)} labels for {values.size} values")
        if len(set(labels)) != len(labels):
            raise LabelMismatch("signal labels must be distinct")
        if self.flavor not in FLAVORS:
            raise GroupAnonymityError(f"unknown signal flavor {self.flavor!r}")
        if not np.all(np.isfinite(values)):
            raise GroupAnonymityError("signal values must be finite")
        if self.flavor == QUANTITY and (np.any(values < 0) or np.any(values != np.round(values))):
            raise GroupAnonymityError("a quantity signal holds non-negative integer counts")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return self.values.size

    def with_values(self, values, flavor=None):
        return Signal(values, self.labels, flavor or self.flavor)


def as_vector(signal):
    """Return the float64 values of a Signal or any 1-D sequence."""
    if isinstance(signal, Signal):
        return np.array(signal.values)
    return np.array(signal, dtype=np.float64).ravel()


@dataclass(frozen=True, eq=False)
class Decomposition:
    level: int
    approx_coeffs: np.ndarray
    detail_coeffs: Tuple[np.ndarray, ...]
    approx: np.ndarray
    details: Tuple[np.ndarray, ...]
    wavelet: WaveletFilter
    signal_len: int

    def recompose(self):
        return self.approx + np.sum(self.details, axis=0)


@dataclass(frozen=True, eq=False)
class ReconstructionMatrix:
    entries: np.ndarray
    level: int
    order: int

    @property
    def shape(self):
        return self.entries.shape


# Kernels

@njit(cache=True)
def _convolve_periodic(x, taps):
    n = x.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(taps.shape[0]):
            j = i - k
            while j < 0:
                j += n
            acc += taps[k] * x[j]
        out[i] = acc
    return out


def _admissible(n, f):
    # every level halves exactly, so len(a_k) == m / 2**k
    if n < 2 or n % 2:
        return False
    return f.order == 1 or n >= f.length


def _level_lengths(signal_len, f, level):
    """Input length of every analysis level, level 1 first."""
    if signal_len < 2:
        raise SignalTooShort(f"need at least 2 samples, got {signal_len}")
    if level < 1:
        raise LevelTooDeep(f"level must be at least 1, got {level}")
    lengths = []
    n = signal_len
    for depth in range(1, level + 1):
        if not _admissible(n, f):
            rule = "an even length" if f.order == 1 else f"an even length of at least {f.length} samples"
            raise LevelTooDeep(
                f"level {level} is too deep for length {signal_len} with {f.name}: "
                f"level {depth} input has {n} samples, needs {rule}"
            )
        lengths.append(n)
        n //= 2
    return lengths


def max_level(signal_len, order):
    """Deepest admissible decomposition level (0 when none)."""
    f = daubechies(order)
    level = 0
    n = signal_len
    while _admissible(n, f):
        level += 1
        n //= 2
    return level


def dwt_step(values, f):
    """One analysis step: periodic convolution followed by dyadic downsampling."""
    s = np.ascontiguousarray(as_vector(values), dtype=np.float64)
    n = s.size
    if n < 2:
        raise SignalTooShort(f"need at least 2 samples, got {n}")
    if f.order == 1 and n % 2:
        raise OddLengthUnsupported(f"db1 needs an even-length signal, got {n}")
    if f.order > 1 and n < f.length:
        raise SignalTooShort(f"{f.name} needs at least {f.length} samples, got {n}")
    if n % 2:
        s = np.append(s, s[-1])
    approx = _convolve_periodic(s, np.array(f.lo_d))[1::2]
    detail = _convolve_periodic(s, np.array(f.hi_d))[1::2]
    return approx, detail


def _synthesis_step(coeffs, taps, out_len):
    padded = 2 * coeffs.size
    upsampled = np.zeros(padded)
    upsampled[1::2] = coeffs
    y = _convolve_periodic(upsampled, np.array(taps))
    return np.roll(y, -(taps.size - 1))[:out_len]


def _upsample_chain(coeffs, f, lengths, first_taps):
    x = coeffs
    taps = first_taps
    for n in reversed(lengths):
        x = _synthesis_step(x, taps, n)
        taps = f.lo_r
    return x


def decompose(signal, f, level):
    """
    Decompose a signal into A_k and D_1..D_k.

    Args:
        signal: Signal or 1-D sequence
        f: WaveletFilter
        level: decomposition depth k >= 1

    Returns:
        Decomposition whose approx + sum(details) reproduces the signal
    """
    values = as_vector(signal)
    lengths = _level_lengths(values.size, f, level)

    approx_coeffs = values
    detail_coeffs = []
    for _ in lengths:
        approx_coeffs, detail = dwt_step(approx_coeffs, f)
        detail_coeffs.append(detail)

    approx = _upsample_chain(approx_coeffs, f, lengths, f.lo_r)
    details = tuple(
        _upsample_chain(detail, f, lengths[: i + 1], f.hi_r)
        for i, detail in enumerate(detail_coeffs)
    )
    logger.debug("Decomposed %d samples with %s to level %d", values.size, f.name, level)
    return Decomposition(
        level=level,
        approx_coeffs=approx_coeffs,
        detail_coeffs=tuple(detail_coeffs),
        approx=approx,
        details=details,
        wavelet=f,
        signal_len=values.size,
    )


def _synthesis_block(lo_d, n):
    half = n // 2
    block = np.zeros((n, half))
    for j in range(half):
        for k, tap in enumerate(lo_d):
            block[(2 * j + 1 - k) % n, j] += tap
    return block


def _wrm_entries(f, level, signal_len):
    entries = None
    for n in _level_lengths(signal_len, f, level):
        block = _synthesis_block(f.lo_d, n)
        entries = block if entries is None else entries @ block
    return entries


def build_wrm(f, level, signal_len):
    """Dense matrix M with M @ a_k == A_k for signals of length signal_len."""
    return ReconstructionMatrix(entries=_wrm_entries(f, level, signal_len), level=level, order=f.order)


def reconstruct_approx(coeffs, wrm):
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.size != wrm.entries.shape[1]:
        raise DimensionMismatch(f"expected {wrm.entries.shape[1]} coefficients, got {coeffs.size}")
    return wrm.entries @ coeffs


def level_table(decomposition: Decomposition) -> Sequence[Tuple[str, np.ndarray]]:
    """Named series (A_k, D_1..D_k) in plotting order."""
    rows = [(f"A_{decomposition.level}", decomposition.approx)]
    rows.extend((f"D_{i}", detail) for i, detail in enumerate(decomposition.details, start=1))
    return rows
