"""
Signal Builder Tests

Group specifications and the quantity / concentration / difference signals
counted from small microfiles.
"""
import numpy as np
import pytest

from engine.errors import DivisorZero, InvalidGroupSpec, LabelMismatch, UnknownAttribute, UnknownParameterValue
from engine.signal_builder import (
    GroupSpec,
    PairedGroupSpec,
    build_concentration_signal,
    build_difference_signal,
    build_group_totals,
    build_quantity_signal,
    compile_combinations,
    compile_values,
    group_mask,
)
from engine.wavelet_engine import CONCENTRATION, DIFFERENCE, Signal
from utils.microdata_store import Microfile

Q = [669, 794, 9, 11, 852, 9, 4, 280, 31, 118, 6, 13, 1, 24, 7, 14, 18, 135]
EMPLOYED = [8375.114, 10759.53, 9683.456, 10860.165, 25754.195, 10153.568, 6916.501, 50678.264, 39889.826,
            10452.677, 9391.875, 9015.932, 8783.689, 11521.906, 11157.981, 24121.785, 30664.742, 46178.394]
C = [0.0799, 0.0738, 0.0009, 0.0010, 0.0331, 0.0009, 0.0006, 0.0055, 0.0008, 0.0113, 0.0006, 0.0014, 0.0001,
     0.0021, 0.0006, 0.0006, 0.0006, 0.0029]
C1 = [0.1057, 0.0865, 0.0891, 0.0917, 0.0782, 0.0673, 0.0629, 0.0634, 0.0761, 0.0559, 0.0758, 0.0673, 0.0786,
      0.0588, 0.0617, 0.0604, 0.0608, 0.0638]
C2 = [0.0706, 0.0663, 0.0905, 0.0904, 0.0698, 0.0620, 0.0539, 0.0614, 0.0683, 0.0554, 0.0622, 0.0501, 0.0499,
      0.0503, 0.0518, 0.0516, 0.0589, 0.0611]
DELTA = [0.0351, 0.0203, -0.0013, 0.0013, 0.0084, 0.0053, 0.0090, 0.0020, 0.0078, 0.0005, 0.0136, 0.0172,
         0.0287, 0.0085, 0.0099, 0.0088, 0.0019, 0.0027]
LABELS = tuple(str(code) for code in range(12010, 12181, 10))

SCHEMA = ("SEX", "AGEP", "MIL", "ESR", "POWPUMA")


def military_spec(values=("A", "B", "C"), denominator=True):
    vital_attrs, combinations = compile_combinations({"MIL": ["1"]})
    denominator_attrs, denominator_combinations = (
        compile_combinations({"ESR": ["1"]}) if denominator else (None, None)
    )
    return GroupSpec(vital_attrs, combinations, "POWPUMA", values, denominator_attrs, denominator_combinations)


def random_microfile(n, seed):
    rng = np.random.default_rng(seed)
    rows = [
        (
            str(rng.integers(1, 3)),
            str(rng.integers(16, 40)),
            str(rng.integers(1, 5)),
            str(rng.choice(["1", "6"])),
            str(rng.choice(["A", "B", "C", "D"])),
        )
        for _ in range(n)
    ]
    return Microfile.from_rows(SCHEMA, rows)


class TestCompile:
    def test_values(self):
        assert compile_values([1, "2"]) == ("1", "2")
        assert compile_values(7) == ("7",)
        assert compile_values({"min": 18, "max": 25}) == tuple(str(a) for a in range(18, 26))

    def test_bad_range(self):
        with pytest.raises(InvalidGroupSpec):
            compile_values({"min": 30, "max": 20})
        with pytest.raises(InvalidGroupSpec):
            compile_values({"min": 1})

    def test_young_males(self):
        attrs, combos = compile_combinations({"SEX": [1], "AGEP": {"min": 18, "max": 25}})
        assert attrs == ("SEX", "AGEP")
        assert len(combos) == 8
        assert ("1", "18") in combos and ("1", "26") not in combos


class TestGroupSpec:
    def test_parameter_cannot_be_vital(self):
        with pytest.raises(InvalidGroupSpec):
            GroupSpec(("POWPUMA",), {("A",)}, "POWPUMA", ("A", "B"))

    def test_parameter_values_distinct(self):
        with pytest.raises(InvalidGroupSpec):
            GroupSpec(("MIL",), {("1",)}, "POWPUMA", ("A", "A"))

    def test_combination_arity(self):
        with pytest.raises(InvalidGroupSpec):
            GroupSpec(("MIL", "SEX"), {("1",)}, "POWPUMA", ("A",))

    def test_vital_outside_denominator(self):
        with pytest.raises(InvalidGroupSpec, match="outside the denominator"):
            GroupSpec(("SEX",), {("1",)}, "POWPUMA", ("A",), ("SEX",), {("2",)})

    def test_denominator_over_other_attribute_accepted(self):
        spec = military_spec()
        assert spec.attributes == ["MIL", "POWPUMA", "ESR"]

    def test_paired_must_share_parameter(self):
        main = military_spec(("A", "B"))
        other = military_spec(("B", "A"))
        with pytest.raises(InvalidGroupSpec):
            PairedGroupSpec(main, other)
        PairedGroupSpec(main, military_spec(("A", "B")))


class TestQuantitySignal:
    def test_matches_exhaustive_scan(self):
        mf = random_microfile(50, seed=3)
        spec = GroupSpec(("SEX", "MIL"), {("1", "1"), ("2", "3")}, "POWPUMA", ("A", "B", "C", "D"))
        expected = []
        for label in spec.parameter_values:
            count = 0
            for _, record in mf.records.iterrows():
                if record["POWPUMA"] == label and (record["SEX"], record["MIL"]) in spec.vital_combinations:
                    count += 1
            expected.append(count)
        signal = build_quantity_signal(mf, spec)
        assert signal.labels == ("A", "B", "C", "D")
        assert signal.values.tolist() == expected

    def test_adding_a_record_increments_one_bucket(self):
        mf = random_microfile(40, seed=11)
        spec = military_spec(("A", "B", "C", "D"), denominator=False)
        before = build_quantity_signal(mf, spec).values
        rows = mf.records.values.tolist() + [["1", "20", "1", "1", "C"]]
        after = build_quantity_signal(Microfile.from_rows(SCHEMA, rows), spec).values
        np.testing.assert_array_equal(after - before, [0, 0, 1, 0])

    def test_empty_group_gives_zeros(self):
        mf = random_microfile(20, seed=5)
        spec = GroupSpec(("MIL",), {("9",)}, "POWPUMA", ("A", "B"))
        assert build_quantity_signal(mf, spec).values.tolist() == [0, 0]

    def test_unknown_attribute(self):
        mf = random_microfile(5, seed=1)
        with pytest.raises(UnknownAttribute, match="RAC1P"):
            build_quantity_signal(mf, GroupSpec(("RAC1P",), {("1",)}, "POWPUMA", ("A",)))

    def test_strict_parameter_values(self):
        mf = random_microfile(30, seed=2)
        spec = military_spec(("A", "Z"))
        assert build_quantity_signal(mf, spec).values[1] == 0
        with pytest.raises(UnknownParameterValue, match="Z"):
            build_quantity_signal(mf, spec, strict=True)

    def test_disjoint_groups_partition_the_totals(self):
        mf = random_microfile(80, seed=17)
        values = ("A", "B", "C", "D")
        parts = [build_quantity_signal(mf, GroupSpec(("MIL",), {(m,)}, "POWPUMA", values)).values
                 for m in ("1", "2", "3", "4")]
        whole = build_quantity_signal(mf, GroupSpec(("MIL",), {("1",), ("2",), ("3",), ("4",)}, "POWPUMA", values))
        np.testing.assert_array_equal(np.sum(parts, axis=0), whole.values)
        totals = build_group_totals(mf, military_spec(values, denominator=False))
        np.testing.assert_array_equal(whole.values, totals.values)
        assert whole.values.sum() == len(mf.records)

    def test_group_mask_single_attribute(self):
        mf = Microfile.from_rows(SCHEMA, [["1", "20", "1", "1", "A"], ["2", "20", "2", "1", "A"]])
        assert group_mask(mf.records, ("MIL",), {("1",)}).tolist() == [True, False]


class TestTotals:
    def test_all_records_one_value(self):
        rows = [["1", "20", str(i % 4 + 1), "1", "A"] for i in range(17)]
        mf = Microfile.from_rows(SCHEMA, rows)
        spec = GroupSpec(("MIL",), {("1",)}, "POWPUMA", ("A",))
        assert build_group_totals(mf, spec).values.tolist() == [17]

    def test_denominator_group(self):
        mf = random_microfile(60, seed=9)
        spec = military_spec(("A", "B", "C", "D"))
        employed = mf.records[mf.records["ESR"] == "1"]
        expected = [int((employed["POWPUMA"] == label).sum()) for label in spec.parameter_values]
        assert build_group_totals(mf, spec).values.tolist() == expected


class TestConcentration:
    def test_military_share_of_employed(self):
        c = build_concentration_signal(Signal(Q, LABELS), EMPLOYED)
        assert c.flavor == CONCENTRATION
        assert c.labels == LABELS
        np.testing.assert_allclose(c.values, C, atol=6e-5)

    def test_zero_total_with_records(self):
        with pytest.raises(DivisorZero, match="b"):
            build_concentration_signal(Signal([1, 2], ("a", "b")), [4, 0])

    def test_empty_bucket_is_zero(self):
        c = build_concentration_signal(Signal([1, 0], ("a", "b")), [4, 0])
        assert c.values.tolist() == [0.25, 0.0]

    def test_label_mismatch(self):
        with pytest.raises(LabelMismatch):
            build_concentration_signal(Signal([1, 2], ("a", "b")), Signal([3, 4], ("a", "c")))


class TestDifference:
    def test_young_males_minus_females(self):
        delta = build_difference_signal(C1, C2)
        assert delta.flavor == DIFFERENCE
        np.testing.assert_allclose(delta.values, DELTA, atol=1.5e-4)

    def test_equal_concentrations(self):
        c = Signal([0.1, 0.2], ("a", "b"), CONCENTRATION)
        assert build_difference_signal(c, c).values.tolist() == [0.0, 0.0]

    def test_swapping_groups_negates(self):
        forward, backward = build_difference_signal(C1, C2), build_difference_signal(C2, C1)
        np.testing.assert_allclose(backward.values, -forward.values, atol=1e-15)
        assert backward.labels == forward.labels

    def test_length_mismatch(self):
        with pytest.raises(LabelMismatch):
            build_difference_signal([0.1, 0.2], [0.1])
