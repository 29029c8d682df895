import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import expit

from mifusion.errors import DataError
from mifusion.svm import (
    PolyKernel,
    SmoConfig,
    SvmOvaModel,
    kernel_eval,
    smo_solve,
    svm_scores,
    svm_train_binary,
    svm_train_ova,
)

from oracles import poly2_gram, svm_dual_active_set

XOR_X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
XOR_Y = np.array([1.0, 1.0, -1.0, -1.0])


def blobs(n_per_class=40, seed=0, spread=0.3):
    """Five tight clusters at the vertices of a scaled simplex in 4-D."""
    rng = np.random.default_rng(seed)
    centres = np.vstack([np.eye(4), -np.ones(4) / 2]) * 3.0
    X = np.vstack([c + spread * rng.normal(size=(n_per_class, 4)) for c in centres])
    return X, np.repeat(np.arange(5), n_per_class)


def random_problem(rng):
    n = int(rng.integers(3, 9))
    X = rng.normal(size=(n, 3))
    y = rng.choice([-1.0, 1.0], n)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    return X, y, float(rng.choice([0.5, 1.0, 10.0]))


class TestKernel:
    def test_examples(self):
        assert kernel_eval(PolyKernel(1.0), np.zeros(3), np.zeros(3)) == 1.0
        assert kernel_eval(PolyKernel(0.0), np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 4.0
        assert kernel_eval(PolyKernel(1.0), np.array([2.0, -1.0, 3.0]), np.array([1.0, 0.0, -1.0])) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(PolyKernel(), np.zeros(2), np.zeros(3))

    def test_only_degree_two(self):
        with pytest.raises(ValueError):
            PolyKernel(1.0, degree=3)

    def test_gram_matches_pairwise(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        np.testing.assert_allclose(PolyKernel(0.7).gram(X, Y), poly2_gram(X, Y, 0.7), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 30), st.floats(0.0, 5.0))
    def test_gram_is_psd(self, seed, n, b0):
        X = np.random.default_rng(seed).normal(size=(n, 4))
        K = PolyKernel(b0).gram(X, X)
        assert np.linalg.eigvalsh(K).min() >= -1e-9 * max(1.0, np.abs(K).max())


class TestBinary:
    def test_xor_separated(self):
        m = svm_train_binary(XOR_X, XOR_Y, PolyKernel(1.0), SmoConfig(C=10.0))
        assert m.converged
        np.testing.assert_array_equal(np.sign(m.decision(XOR_X)), XOR_Y)

    def test_conflicting_duplicates_hit_the_bound(self):
        X = np.array([[0.5, 0.5], [0.5, 0.5], [2.0, 0.0], [-2.0, 0.0]])
        y = np.array([1.0, -1.0, 1.0, -1.0])
        C = 0.1
        K = PolyKernel().gram(X, X)
        alpha, _, info = smo_solve(K, y, C, 1e-6, 10_000)
        assert info["converged"]
        assert alpha[0] == pytest.approx(C) and alpha[1] == pytest.approx(C)

    @pytest.mark.parametrize("seed", range(5))
    def test_dual_feasibility(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 3))
        y = np.where(X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=60) > 0, 1.0, -1.0)
        C = 2.0
        K = PolyKernel().gram(X, X)
        alpha, _, info = smo_solve(K, y, C, 1e-3, 100_000, seed)
        assert info["converged"]
        assert np.all(alpha >= 0) and np.all(alpha <= C)
        assert abs(alpha @ y) < 1e-8

    def test_dual_objective_non_decreasing(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 2))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=50) > 0, 1.0, -1.0)
        m = svm_train_binary(X, y, PolyKernel(), SmoConfig(C=1.0))
        assert np.all(np.diff(m.dual_objective) >= -1e-10)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2011)
        for _ in range(50):
            X, y, C = random_problem(rng)
            K = poly2_gram(X, X, 1.0)
            alpha, b = svm_dual_active_set(K, y, C)
            expected = K @ (alpha * y) + b
            m = svm_train_binary(X, y, PolyKernel(1.0), SmoConfig(C=C, kkt_tolerance=1e-8))
            got = m.decision(X)
            decisive = np.abs(expected) > 1e-6
            np.testing.assert_array_equal(np.sign(got[decisive]), np.sign(expected[decisive]))
            np.testing.assert_allclose(got, expected, atol=1e-6)

    def test_zero_multiplier_points_do_not_matter(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 2))
        y = np.where(X[:, 0] > 0, 1.0, -1.0)
        K = PolyKernel().gram(X, X)
        alpha, rho, _ = smo_solve(K, y, 10.0, 1e-6, 100_000)
        full = K @ (alpha * y) - rho
        keep = alpha > 0
        assert not keep.all()
        reduced = K[:, keep] @ (alpha * y)[keep] - rho
        np.testing.assert_allclose(reduced, full, rtol=0, atol=1e-12)

    def test_single_label_rejected(self):
        with pytest.raises(DataError):
            svm_train_binary(XOR_X, np.ones(4))

    def test_seeded(self):
        X, y = blobs(10)
        yb = np.where(y == 0, 1.0, -1.0)
        a = svm_train_binary(X, yb, cfg=SmoConfig(seed=3))
        b = svm_train_binary(X, yb, cfg=SmoConfig(seed=3))
        np.testing.assert_array_equal(a.dual_coefficients, b.dual_coefficients)
        assert a.bias == b.bias


@pytest.fixture(scope="module")
def model():
    X, y = blobs()
    return svm_train_ova((X, y), PolyKernel(1.0), SmoConfig(C=10.0)), X, y


class TestOneVsAll:
    def test_five_machines(self, model):
        m, _, _ = model
        assert len(m.machines) == 5
        assert m.calibration.shape == (5, 2)

    def test_each_machine_fits_training_data(self, model):
        m, X, y = model
        D = m.decision(X)
        for c in range(5):
            assert np.mean(np.sign(D[:, c]) == np.where(y == c, 1, -1)) > 0.99

    def test_scores_in_unit_interval_and_confident(self, model):
        m, X, y = model
        S = svm_scores(m, X)
        assert np.all((S > 0) & (S < 1))
        centres = np.vstack([np.eye(4), -np.ones(4) / 2]) * 3.0
        for c in range(5):
            s = svm_scores(m, centres[c])
            assert s[c] > 0.9
            assert np.all(np.delete(s, c) < 0.5)

    def test_scores_match_kernel_sum_oracle(self, model):
        m, X, _ = model
        x = X[7] + 0.1
        xs = (x - m.scaler.mean) / m.scaler.std
        for c, machine in enumerate(m.machines):
            f = sum(a * (float(np.dot(sv, xs)) + 1.0) ** 2
                    for a, sv in zip(machine.dual_coefficients, machine.support_vectors)) + machine.bias
            slope, intercept = m.calibration[c]
            assert svm_scores(m, x)[c] == pytest.approx(expit(slope * f + intercept), abs=1e-10)

    def test_zero_slope_gives_constant_scores(self, model):
        m, X, _ = model
        cal = m.calibration.copy()
        cal[:, 0] = 0.0
        flat = dataclasses.replace(m, calibration=cal)
        np.testing.assert_allclose(svm_scores(flat, X), np.tile(expit(cal[:, 1]), (len(X), 1)), atol=0)

    def test_boundary_point_scores_at_intercept(self, model):
        m, X, y = model
        a, b = X[y == 0][0], X[y == 1][0]
        f = lambda t: m.decision(a + t * (b - a))[0]
        assert f(0.0) > 0 > f(1.0)
        x0 = a + brentq(f, 0.0, 1.0, xtol=1e-14) * (b - a)
        d = m.decision(x0)[0]
        slope, intercept = m.calibration[0]
        assert abs(d) < 1e-9
        assert abs(svm_scores(m, x0)[0] - expit(intercept)) <= 0.25 * abs(slope * d) + 1e-15

    def test_text_round_trip(self, model):
        m, X, _ = model
        back = SvmOvaModel.from_text(m.to_text())
        np.testing.assert_array_equal(svm_scores(back, X), svm_scores(m, X))
        assert back.to_text() == m.to_text()

    def test_missing_class(self):
        X, y = blobs(5)
        with pytest.raises(DataError, match="APB"):
            svm_train_ova((X[y != 2], y[y != 2]))

    def test_imbalanced_still_five_machines(self):
        X, y = blobs(20)
        keep = (y != 3) | (np.arange(len(y)) % 20 < 2)
        m = svm_train_ova((X[keep], y[keep]))
        assert len(m.machines) == 5
