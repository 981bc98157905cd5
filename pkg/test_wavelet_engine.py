"""
Wavelet Engine Tests

Daubechies filters, periodic decomposition/reconstruction and the
reconstruction matrix, checked against the military quantity signal and
against PyWavelets.
"""
import numpy as np
import pytest
import pywt

from engine.errors import (
    DimensionMismatch,
    GroupAnonymityError,
    LabelMismatch,
    LevelTooDeep,
    OddLengthUnsupported,
    SignalTooShort,
    UnsupportedFilter,
)
from engine.wavelet_engine import (
    CONCENTRATION,
    QUANTITY,
    Signal,
    WaveletFilter,
    build_wrm,
    daubechies,
    decompose,
    dwt_step,
    level_table,
    max_level,
    reconstruct_approx,
)

Q = np.array([669, 794, 9, 11, 852, 9, 4, 280, 31, 118, 6, 13, 1, 24, 7, 14, 18, 135], dtype=float)
LABELS = tuple(str(code) for code in range(12010, 12181, 10))


class TestFilters:
    def test_haar_taps(self):
        f = daubechies(1)
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(f.lo_d, [r, r])
        np.testing.assert_allclose(f.hi_d, [r, -r])
        assert f.name == "db1"
        assert f.length == 2

    @pytest.mark.parametrize("order", range(1, 11))
    def test_orthonormal_mirror_pair(self, order):
        f = daubechies(order)
        assert f.length == 2 * order
        assert abs(np.sum(f.lo_d ** 2) - 1.0) < 1e-12
        assert abs(np.sum(f.lo_d) - np.sqrt(2)) < 1e-10
        expected = [(-1) ** i * f.lo_d[f.length - 1 - i] for i in range(f.length)]
        np.testing.assert_allclose(f.hi_d, expected, atol=1e-15)
        np.testing.assert_allclose(f.lo_r, f.lo_d[::-1])

    @pytest.mark.parametrize("order", [0, 11, -1, 2.5, True])
    def test_unsupported_order(self, order):
        with pytest.raises(UnsupportedFilter):
            daubechies(order)

    def test_taps_are_read_only(self):
        with pytest.raises(ValueError):
            daubechies(2).lo_d[0] = 0.0

    def test_non_orthonormal_taps_rejected(self):
        with pytest.raises(UnsupportedFilter):
            WaveletFilter(order=1, lo_d=[1.0, 1.0], hi_d=[1.0, -1.0], lo_r=[1.0, 1.0], hi_r=[-1.0, 1.0])


class TestSignal:
    def test_labels_and_values(self):
        s = Signal(Q, LABELS)
        assert len(s) == 18
        assert s.labels[0] == "12010"
        with pytest.raises(ValueError):
            s.values[0] = 1.0

    def test_quantity_must_be_counts(self):
        with pytest.raises(GroupAnonymityError):
            Signal([1.5, 2.0], ("a", "b"), QUANTITY)
        with pytest.raises(GroupAnonymityError):
            Signal([-1, 2], ("a", "b"), QUANTITY)
        Signal([0.25, 0.5], ("a", "b"), CONCENTRATION)

    def test_label_problems(self):
        with pytest.raises(LabelMismatch):
            Signal([1, 2], ("a",))
        with pytest.raises(LabelMismatch):
            Signal([1, 2], ("a", "a"))

    def test_empty_signal(self):
        with pytest.raises(SignalTooShort):
            Signal([], ())


class TestDecompose:
    def test_military_signal_level_one(self):
        d = decompose(Signal(Q, LABELS), daubechies(1), 1)
        np.testing.assert_allclose(
            d.approx_coeffs,
            [1034.4972, 14.1421, 608.8189, 200.8183, 105.3589, 13.4350, 17.6777, 14.8492, 108.1873],
            atol=1e-4,
        )
        np.testing.assert_allclose(
            d.approx,
            [731.5, 731.5, 10, 10, 430.5, 430.5, 142, 142, 74.5, 74.5, 9.5, 9.5, 12.5, 12.5, 10.5, 10.5, 76.5, 76.5],
            atol=1e-9,
        )
        np.testing.assert_allclose(
            d.details[0],
            [-62.5, 62.5, -1, 1, 421.5, -421.5, -138, 138, -43.5, 43.5, -3.5, 3.5, -11.5, 11.5, -3.5, 3.5,
             -58.5, 58.5],
            atol=1e-9,
        )

    def test_difference_signal_coefficients(self):
        delta = [0.0351, 0.0203, -0.0013, 0.0013, 0.0084, 0.0053, 0.0090, 0.0020, 0.0078, 0.0005, 0.0136,
                 0.0172, 0.0287, 0.0085, 0.0099, 0.0088, 0.0019, 0.0027]
        d = decompose(delta, daubechies(1), 1)
        np.testing.assert_allclose(
            d.approx_coeffs,
            [0.0392, -0.0000, 0.0097, 0.0078, 0.0059, 0.0218, 0.0263, 0.0132, 0.0033],
            atol=1e-4,
        )

    def test_haar_matches_pywavelets(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=32)
        ours = decompose(x, daubechies(1), 3)
        theirs = pywt.wavedec(x, "db1", mode="periodization", level=3)
        np.testing.assert_allclose(ours.approx_coeffs, theirs[0], atol=1e-12)
        for level, detail in enumerate(ours.detail_coeffs, start=1):
            np.testing.assert_allclose(np.abs(detail), np.abs(theirs[-level]), atol=1e-12)

    @pytest.mark.parametrize("order,length", [(1, 16), (1, 18), (2, 18), (2, 20), (3, 36), (4, 64), (10, 40)])
    def test_perfect_reconstruction(self, order, length):
        rng = np.random.default_rng(order * 100 + length)
        x = rng.integers(0, 1000, size=length).astype(float)
        f = daubechies(order)
        for level in range(1, max_level(length, order) + 1):
            d = decompose(x, f, level)
            assert len(d.details) == level
            np.testing.assert_allclose(d.recompose(), x, atol=1e-8)

    def test_constant_signal_has_no_detail(self):
        d = decompose(np.full(16, 5.0), daubechies(2), 2)
        for detail in d.details:
            np.testing.assert_allclose(detail, 0.0, atol=1e-10)
        np.testing.assert_allclose(d.approx, 5.0, atol=1e-10)

    def test_level_too_deep(self):
        with pytest.raises(LevelTooDeep, match="level 2"):
            decompose(Q, daubechies(1), 2)
        with pytest.raises(LevelTooDeep):
            decompose(Q, daubechies(1), 0)

    def test_too_short(self):
        with pytest.raises(SignalTooShort):
            decompose([3.0], daubechies(1), 1)
        with pytest.raises(SignalTooShort):
            dwt_step([1.0, 2.0, 3.0], daubechies(2))

    def test_odd_length_haar(self):
        with pytest.raises(OddLengthUnsupported):
            dwt_step([1.0, 2.0, 3.0], daubechies(1))

    def test_odd_length_longer_filter(self):
        with pytest.raises(LevelTooDeep, match="an even length of at least 4 samples"):
            decompose(np.arange(21, dtype=float), daubechies(2), 1)
        with pytest.raises(LevelTooDeep, match="level 2 input has 9 samples"):
            decompose(np.arange(18, dtype=float), daubechies(2), 2)

    def test_linearity(self):
        rng = np.random.default_rng(31)
        x, y = rng.normal(size=(2, 24))
        f = daubechies(2)
        dx, dy, dz = (decompose(s, f, 2) for s in (x, y, 3.0 * x - 0.5 * y))
        np.testing.assert_allclose(dz.approx, 3.0 * dx.approx - 0.5 * dy.approx, atol=1e-10)
        for i in range(2):
            np.testing.assert_allclose(dz.details[i], 3.0 * dx.details[i] - 0.5 * dy.details[i], atol=1e-10)

    @pytest.mark.parametrize("factor", [0.0, -2.0, 0.1722, 7.5])
    def test_scaling(self, factor):
        x = np.arange(32, dtype=float) ** 1.5
        f = daubechies(3)
        base, scaled = decompose(x, f, 2), decompose(factor * x, f, 2)
        np.testing.assert_allclose(scaled.approx_coeffs, factor * base.approx_coeffs, atol=1e-9)
        for ours, theirs in zip(scaled.details, base.details):
            np.testing.assert_allclose(ours, factor * theirs, atol=1e-9)

    def test_level_table_order(self):
        d = decompose(np.arange(16, dtype=float), daubechies(1), 2)
        assert [name for name, _ in level_table(d)] == ["A_2", "D_1", "D_2"]


class TestMaxLevel:
    def test_values(self):
        assert max_level(18, 1) == 1
        assert max_level(16, 1) == 4
        assert max_level(18, 2) == 1
        assert max_level(24, 2) == 3
        assert max_level(24, 3) == 3
        assert max_level(20, 3) == 1
        assert max_level(3, 2) == 0
        assert max_level(1, 1) == 0


class TestReconstructionMatrix:
    def test_military_new_approximation(self):
        wrm = build_wrm(daubechies(1), 1, 18)
        assert wrm.shape == (18, 9)
        new_coeffs = [334.3871, 390.1183, -445.8494, 55.7312, 167.1935, 445.8494, 501.5806, 390.1183, 278.6559]
        np.testing.assert_allclose(
            reconstruct_approx(new_coeffs, wrm),
            [236.4474, 236.4474, 275.8553, 275.8553, -315.2632, -315.2632, 39.4079, 39.4079, 118.2237,
             118.2237, 315.2632, 315.2632, 354.6711, 354.6711, 275.8553, 275.8553, 197.0395, 197.0395],
            atol=1e-4,
        )

    @pytest.mark.parametrize("order,length,level", [(1, 32, 3), (2, 20, 2), (2, 24, 3), (3, 40, 2), (5, 50, 1)])
    def test_matches_synthesis(self, order, length, level):
        rng = np.random.default_rng(length)
        f = daubechies(order)
        d = decompose(rng.normal(size=length), f, level)
        wrm = build_wrm(f, level, length)
        assert wrm.shape == (length, d.approx_coeffs.size)
        np.testing.assert_allclose(reconstruct_approx(d.approx_coeffs, wrm), d.approx, atol=1e-10)

    def test_wrong_coefficient_count(self):
        with pytest.raises(DimensionMismatch):
            reconstruct_approx(np.ones(8), build_wrm(daubechies(1), 1, 18))


def random_cases(count, seed):
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        order, length = int(rng.integers(1, 5)), int(rng.integers(4, 65))
        deepest = max_level(length, order)
        if deepest:
            cases.append((order, int(rng.integers(1, deepest + 1)), rng.normal(scale=100.0, size=length)))
    return cases


def test_random_signals_reconstruct():
    for order, level, x in random_cases(1000, seed=2010):
        d = decompose(x, daubechies(order), level)
        np.testing.assert_allclose(d.approx + np.sum(d.details, axis=0), x, rtol=0, atol=1e-9)


def test_random_wrm_matches_synthesis():
    for order, level, x in random_cases(200, seed=12):
        f = daubechies(order)
        d = decompose(x, f, level)
        np.testing.assert_allclose(reconstruct_approx(d.approx_coeffs, build_wrm(f, level, x.size)), d.approx,
                                   rtol=0, atol=1e-9)


def test_random_coefficient_counts_halve():
    for order, level, x in random_cases(300, seed=5):
        d = decompose(x, daubechies(order), level)
        assert d.approx_coeffs.size * 2 ** level == x.size
        for depth, coeffs in enumerate(d.detail_coeffs, start=1):
            assert coeffs.size * 2 ** depth == x.size
