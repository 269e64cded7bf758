import numpy as np
import pytest

from eotmix.core import (
    CostMatrix,
    Coupling,
    Dataset,
    GmmParams,
    ProbabilityVector,
    column_marginal,
    row_marginal,
    validate_simplex,
)
from eotmix.errors import (
    InvalidCoupling,
    InvalidDataset,
    NonFiniteCost,
    NonPositiveDefiniteCovariance,
    NotASimplexPoint,
    ShapeMismatch,
)


class TestProbabilityVector:
    def test_uniform(self):
        assert np.allclose(ProbabilityVector.uniform(4).weights, 0.25)

    def test_rejects_negative(self):
        with pytest.raises(NotASimplexPoint):
            ProbabilityVector([1.2, -0.2])

    def test_rejects_bad_sum(self):
        with pytest.raises(NotASimplexPoint):
            ProbabilityVector([0.9, 0.3])

    def test_tiny_negative_clamped(self):
        p = ProbabilityVector([1.0, -1e-15])
        assert p.weights[1] == 0.0

    def test_read_only(self):
        p = ProbabilityVector([0.5, 0.5])
        with pytest.raises(ValueError):
            p.weights[0] = 1.0


class TestValidateSimplex:
    def test_accepts_unchanged(self):
        assert np.array_equal(validate_simplex([0.5, 0.5]).weights, [0.5, 0.5])

    def test_renormalizes_within_tolerance(self):
        p = validate_simplex([0.5, 0.5000000001], tol=1e-8)
        assert abs(p.weights.sum() - 1.0) <= 1e-15
        assert p.weights[1] > p.weights[0]

    def test_rejects_far_off(self):
        with pytest.raises(NotASimplexPoint):
            validate_simplex([0.9, 0.3])

    def test_small_negative_clamped(self):
        p = validate_simplex([1.0 + 5e-11, -5e-11])
        assert p.weights[1] == 0.0


class TestMarginals:
    def test_uniform_coupling(self):
        P = np.full((2, 3), 1 / 6)
        assert np.allclose(row_marginal(P).weights, [0.5, 0.5])
        assert np.allclose(column_marginal(P).weights, [1 / 3] * 3)

    def test_hard_assignment(self):
        n = 5
        P = np.zeros((n, 3))
        P[:, 0] = 1 / n
        assert np.allclose(row_marginal(P).weights, 1 / n)
        assert np.allclose(column_marginal(P).weights, [1, 0, 0])

    def test_product_coupling(self):
        a, b = np.array([0.3, 0.7]), np.array([0.5, 0.5])
        P = np.outer(a, b)
        assert np.allclose(row_marginal(P).weights, a)
        assert np.allclose(column_marginal(P).weights, b)


class TestCoupling:
    def test_semi_relaxed(self):
        P = np.array([[0.3, 0.3], [0.4, 0.0]])
        with pytest.raises(InvalidCoupling):
            Coupling.semi_relaxed(P)
        c = Coupling.semi_relaxed(np.array([[0.25, 0.25], [0.4, 0.1]]))
        assert c.shape == (2, 2)
        assert c.column_marginal is None

    def test_column_marginal_enforced(self):
        P = np.outer([0.5, 0.5], [0.2, 0.8])
        Coupling(P, [0.5, 0.5], [0.2, 0.8])
        with pytest.raises(InvalidCoupling):
            Coupling(P, [0.5, 0.5], [0.5, 0.5])

    def test_negative_entry(self):
        with pytest.raises(InvalidCoupling):
            Coupling(np.array([[0.6, -0.1], [0.25, 0.25]]), [0.5, 0.5])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Coupling(np.full((2, 2), 0.25), [1 / 3] * 3)


def test_cost_matrix_rejects_nan():
    with pytest.raises(NonFiniteCost):
        CostMatrix(np.array([[0.0, np.nan]]))


class TestGmmParams:
    def test_valid(self):
        p = GmmParams(np.zeros((2, 3)), np.eye(3), [0.5, 0.5])
        assert (p.n_components, p.dimension) == (2, 3)

    def test_asymmetric(self):
        with pytest.raises(NonPositiveDefiniteCovariance):
            GmmParams(np.zeros((1, 2)), [[1.0, 0.1], [0.0, 1.0]], [1.0])

    def test_indefinite(self):
        with pytest.raises(NonPositiveDefiniteCovariance):
            GmmParams(np.zeros((1, 2)), [[1.0, 2.0], [2.0, 1.0]], [1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeMismatch):
            GmmParams(np.zeros((2, 2)), np.eye(3), [0.5, 0.5])

    def test_weight_count(self):
        with pytest.raises(ShapeMismatch):
            GmmParams(np.zeros((2, 2)), np.eye(2), [1.0])


class TestDataset:
    def test_vector_becomes_column(self):
        ds = Dataset([1.0, 2.0, 3.0])
        assert (ds.n, ds.dimension, len(ds)) == (3, 1, 3)

    def test_labels_must_be_positive_integers(self):
        Dataset(np.zeros((2, 1)), [1, 2])
        with pytest.raises(InvalidDataset):
            Dataset(np.zeros((2, 1)), [0, 1])
        with pytest.raises(InvalidDataset):
            Dataset(np.zeros((2, 1)), [1.5, 1])

    def test_non_finite(self):
        with pytest.raises(InvalidDataset):
            Dataset([[np.inf]])
