import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mifusion.metrics import (
    ConfusionCounts,
    DegenerateEntropyWarning,
    class_metrics,
    confusion,
    entropy_prediction_marginal,
    entropy_truth_marginal,
    joint_entropy,
    mutual_information,
    normalized_mi,
)

from oracles import mi_identity

cells = st.integers(min_value=0, max_value=10_000)


@st.composite
def tables(draw):
    c = ConfusionCounts(draw(cells), draw(cells), draw(cells), draw(cells))
    if c.n == 0:
        c = ConfusionCounts(1, 0, 0, 0)
    return c


class TestConfusion:
    def test_perfect(self):
        assert confusion([1, 1, 0, 0], [1, 1, 0, 0]) == ConfusionCounts(tp=2, tn=2, fp=0, fn=0)

    def test_complement(self):
        assert confusion([0, 0, 1, 1], [1, 1, 0, 0]) == ConfusionCounts(tp=0, tn=0, fp=2, fn=2)

    def test_mixed(self):
        assert confusion([1, 0, 1, 0, 0], [1, 1, 0, 0, 0]) == ConfusionCounts(tp=1, tn=2, fp=1, fn=1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            confusion([1, 0], [1])

    def test_negative_cell_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(-1, 0, 0, 0)


class TestEntropies:
    def test_balanced_marginal(self):
        assert entropy_truth_marginal(ConfusionCounts(25, 25, 25, 25)) == pytest.approx(math.log(2), abs=1e-12)

    def test_degenerate_marginal(self):
        assert entropy_truth_marginal(ConfusionCounts(100, 0, 0, 0)) == 0.0

    def test_marginal_uses_truth_split(self):
        # (40 + 10) / 100 = 0.5
        assert entropy_truth_marginal(ConfusionCounts(tp=40, tn=45, fp=5, fn=10)) == pytest.approx(
            math.log(2), abs=1e-12)

    def test_joint_uniform(self):
        assert joint_entropy(ConfusionCounts(25, 25, 25, 25)) == pytest.approx(math.log(4), abs=1e-12)

    def test_joint_point_mass(self):
        assert joint_entropy(ConfusionCounts(0, 0, 7, 0)) == 0.0

    def test_joint_two_cells(self):
        assert joint_entropy(ConfusionCounts(50, 50, 0, 0)) == pytest.approx(math.log(2), abs=1e-12)


class TestMutualInformation:
    def test_identity_channel(self):
        c = ConfusionCounts(50, 50, 0, 0)
        assert mutual_information(c) == pytest.approx(math.log(2), abs=1e-12)
        assert mutual_information(c) == pytest.approx(entropy_truth_marginal(c), abs=1e-12)

    def test_independence(self):
        assert abs(mutual_information(ConfusionCounts(25, 25, 25, 25))) < 1e-12

    def test_against_identity_oracle(self):
        c = ConfusionCounts(tp=40, tn=45, fp=5, fn=10)
        expected, _, _ = mi_identity(40, 45, 5, 10)
        assert mutual_information(c) == pytest.approx(expected, abs=1e-12)
        # hand sum of p log(p / (p_row p_col)) over the four cells
        assert expected == pytest.approx(0.275396, abs=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(tables())
    def test_identity_and_bounds(self, c):
        oracle, h_pred, h_true = mi_identity(c.tp, c.tn, c.fp, c.fn)
        mi = mutual_information(c)
        assert mi == pytest.approx(oracle, abs=1e-12)
        assert -1e-12 <= mi <= min(h_pred, h_true) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(tables())
    def test_symmetric_under_transpose(self, c):
        # swapping predicted and true roles exchanges fp and fn
        swapped = ConfusionCounts(c.tp, c.tn, c.fn, c.fp)
        assert mutual_information(swapped) == pytest.approx(mutual_information(c), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(tables(), st.integers(min_value=1, max_value=50))
    def test_cell_scaling_invariance(self, c, k):
        s = c.scaled(k)
        assert mutual_information(s) == pytest.approx(mutual_information(c), abs=1e-12)
        assert joint_entropy(s) == pytest.approx(joint_entropy(c), abs=1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEntropyWarning)
            assert normalized_mi(s) == pytest.approx(normalized_mi(c), abs=1e-12)
        if c.tp + c.fn and c.tn + c.fp:
            a, b = class_metrics(c), class_metrics(s)
            assert a.sensitivity == pytest.approx(b.sensitivity, abs=1e-15)
            assert a.specificity == pytest.approx(b.specificity, abs=1e-15)
            assert a.accuracy == pytest.approx(b.accuracy, abs=1e-15)


class TestNormalizedMI:
    def test_perfect_is_exactly_one(self):
        for tp, tn in [(50, 50), (3, 97), (1, 1000)]:
            assert normalized_mi(ConfusionCounts(tp, tn, 0, 0)) == 1.0

    def test_independence_is_zero(self):
        assert normalized_mi(ConfusionCounts(25, 25, 25, 25)) == pytest.approx(0.0, abs=1e-12)

    def test_zero_denominator_warns(self):
        with pytest.warns(DegenerateEntropyWarning):
            assert normalized_mi(ConfusionCounts(tp=90, tn=0, fp=0, fn=10)) == 0.0

    def test_all_positive_predictions_zero_under_prediction_margin(self):
        with pytest.warns(DegenerateEntropyWarning):
            assert normalized_mi(ConfusionCounts(tp=90, tn=0, fp=10, fn=0), "prediction") == 0.0

    def test_prediction_denominator(self):
        c = ConfusionCounts(tp=40, tn=45, fp=5, fn=10)
        assert normalized_mi(c, "prediction") == pytest.approx(
            mutual_information(c) / entropy_prediction_marginal(c), abs=1e-15)

    def test_unknown_denominator(self):
        with pytest.raises(ValueError):
            normalized_mi(ConfusionCounts(1, 1, 1, 1), "joint")

    @settings(max_examples=300, deadline=None)
    @given(tables())
    def test_bounds(self, c):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEntropyWarning)
            assert 0.0 <= normalized_mi(c) <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(tables())
    def test_log_base_invariance(self, c):
        # the ratio in bits equals the ratio in nats
        mi_bits, _, _ = mi_identity(c.tp, c.tn, c.fp, c.fn)
        h = entropy_truth_marginal(c)
        if h > 0 and not (c.fp == c.fn == 0 or c.tp == c.tn == 0):
            ratio_bits = (mi_bits / math.log(2)) / (h / math.log(2))
            assert normalized_mi(c) == pytest.approx(min(1.0, max(0.0, ratio_bits)), abs=1e-12)


class TestClassMetrics:
    def test_perfect(self):
        m = class_metrics(ConfusionCounts(50, 50, 0, 0))
        assert (m.accuracy, m.sensitivity, m.specificity, m.fpr, m.fnr) == (1.0, 1.0, 1.0, 0.0, 0.0)

    def test_hand_computed(self):
        m = class_metrics(ConfusionCounts(tp=1, tn=4, fp=2, fn=3))
        assert m.sensitivity == 0.25
        assert m.specificity == pytest.approx(2 / 3, abs=1e-15)
        assert m.accuracy == 0.5

    def test_reported_rbbb_rates_are_complementary(self):
        # 93.33% sensitivity / 99.67% specificity leave 6.67% FNR and 0.33% FPR
        c = ConfusionCounts(tp=9333, fn=667, tn=9967, fp=33)
        m = class_metrics(c)
        assert round(100 * m.sensitivity, 2) == 93.33
        assert round(100 * m.specificity, 2) == 99.67
        assert round(100 * m.fnr, 2) == 6.67
        assert round(100 * m.fpr, 2) == 0.33

    @given(tables())
    def test_rate_identities(self, c):
        if c.tp + c.fn and c.tn + c.fp:
            m = class_metrics(c)
            assert m.fpr == 1.0 - m.specificity
            assert m.fnr == 1.0 - m.sensitivity

    def test_empty_positive_side(self):
        with pytest.raises(ValueError, match="positive"):
            class_metrics(ConfusionCounts(0, 5, 1, 0))

    def test_empty_negative_side(self):
        with pytest.raises(ValueError, match="negative"):
            class_metrics(ConfusionCounts(5, 0, 0, 1))
