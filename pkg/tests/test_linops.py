import math

import numpy as np
import pytest

from mhdm import linops
from mhdm.errors import NumericalFailure


def _operators():
    return [
        linops.identity(7),
        linops.make_gaussian_conv(30, 0.05),
        linops.diff_matrix(9),
        linops.substitution_operator(12),
        linops.from_matrix(np.arange(12.0).reshape(4, 3)),
    ]


@pytest.mark.parametrize("T", _operators(), ids=lambda T: T.kind)
def test_adjoint_consistency(T, rng):
    for _ in range(100):
        x = rng.standard_normal(T.cols)
        y = rng.standard_normal(T.rows)
        lhs = float(np.dot(T.apply(x), y))
        rhs = float(np.dot(x, T.adjoint(y)))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_gaussian_tiny_sigma_is_identity():
    T = linops.make_gaussian_conv(5, 1e-6)
    np.testing.assert_allclose(T.matrix, np.eye(5), atol=1e-15)


def test_gaussian_columns_have_unit_sum():
    T = linops.make_gaussian_conv(100, 0.1)
    np.testing.assert_allclose(T.matrix.sum(axis=0), 1.0, atol=1e-13)
    assert np.all(T.matrix >= 0)


def test_gaussian_interior_row_sums():
    # sigma = 0.1 kernels reach the boundary, so unit column sums leave a ~2e-3
    # defect in the central rows; a narrow kernel recovers the 1e-6 level
    T = linops.make_gaussian_conv(100, 0.1)
    rows = T.matrix.sum(axis=1)[40:60]
    assert np.max(np.abs(rows - 1.0)) < 3e-3
    T = linops.make_gaussian_conv(100, 0.02)
    rows = T.matrix.sum(axis=1)[20:80]
    assert np.max(np.abs(rows - 1.0)) < 1e-6


def test_gaussian_is_linf_contraction_on_nonnegative(rng):
    T = linops.make_gaussian_conv(64, 0.07)
    for _ in range(50):
        x = rng.uniform(0, 1, 64)
        # unit column sums bound the l1 norm; on nonnegative inputs the max is bounded by
        # max row sum times max entry
        assert np.max(T.apply(x)) <= np.max(T.matrix.sum(axis=1)) * np.max(x) + 1e-12
        assert np.sum(T.apply(x)) == pytest.approx(np.sum(x), rel=1e-12)


def test_gaussian_rejects_bad_arguments():
    with pytest.raises(ValueError):
        linops.make_gaussian_conv(2, 0.1)
    with pytest.raises(ValueError):
        linops.make_gaussian_conv(10, 0.0)


def test_diff_matrix_examples():
    D = linops.diff_matrix(3)
    np.testing.assert_array_equal(D.apply([1.0, 1.0, 1.0]), [0.0, 0.0])
    np.testing.assert_array_equal(D.apply([0.0, 1.0, 3.0]), [1.0, 2.0])
    D4 = linops.diff_matrix(4).matrix
    expected = np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
    np.testing.assert_array_equal(D4 @ D4.T, expected)


def test_substitution_operator_small_cases():
    T = linops.substitution_operator(2)
    np.testing.assert_allclose(T.matrix, [[-0.5], [0.5]], atol=1e-15)
    T3 = linops.substitution_operator(3).matrix
    D = linops.diff_matrix(3).matrix
    np.testing.assert_allclose(np.linalg.inv(T3.T @ T3), D @ D.T, atol=1e-10)


@pytest.mark.parametrize("n", [2, 5, 50, 200])
def test_substitution_operator_gram_inverse(n):
    T = linops.substitution_operator(n).matrix
    D = linops.diff_matrix(n).matrix
    err = np.max(np.abs((T.T @ T) @ (D @ D.T) - np.eye(n - 1)))
    assert err <= 1e-8
    np.testing.assert_allclose(T.sum(axis=0), 0.0, atol=1e-10)


def test_op_norm_estimate_examples():
    assert linops.op_norm_estimate(linops.identity(6), 1e-10) == 1.0
    diag = linops.from_matrix(np.diag([3.0, 1.0]))
    assert linops.op_norm_estimate(diag, 1e-10) == pytest.approx(3.0, abs=1e-9)
    D = linops.diff_matrix(50)
    # closed form 2 sin(49 pi / 100), also the dense eigensolve value 1.999013120731463
    assert linops.op_norm_estimate(D, 1e-12) == pytest.approx(2 * math.sin(49 * math.pi / 100), rel=1e-6)
    assert D.norm == pytest.approx(1.999013120731463, rel=1e-6)


def test_op_norm_estimate_budget_failure():
    A = linops.from_matrix(np.diag([1.0, 0.999999, 0.5]))
    with pytest.raises(NumericalFailure) as info:
        linops.op_norm_estimate(A, tol=1e-15, max_iter=3)
    assert 0.5 < info.value.last_estimate <= 1.0


def test_as_signal_validation():
    np.testing.assert_array_equal(linops.as_signal([1, 2]), [1.0, 2.0])
    with pytest.raises(ValueError):
        linops.as_signal([[1.0]])
    with pytest.raises(ValueError):
        linops.as_signal([1.0, math.nan])
    with pytest.raises(ValueError):
        linops.as_signal([1.0], n=2)


def test_operator_is_immutable_and_checks_shapes():
    T = linops.from_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        T.matrix[0, 0] = 5.0
    with pytest.raises(ValueError):
        T.apply(np.ones(2))
    with pytest.raises(ValueError):
        T.adjoint(np.ones(3))
    assert T.gram.shape == (3, 3)


def test_grid_helpers():
    t = linops.grid_nodes(5)
    np.testing.assert_allclose(t, [0, 0.25, 0.5, 0.75, 1.0])
    assert linops.grid_spacing(100) == 0.01
