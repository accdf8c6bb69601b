import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnncompose.sparse import (
    CsrMatrix,
    DegenerateNodeError,
    ShapeError,
    add_self_loops,
    dense_matrix,
    gemm,
    inv_sqrt_degrees,
    scale_rows,
    sddmm,
    spmm,
    spmm_unweighted,
)

from helpers import oracle_matmul, oracle_sddmm_dense, random_csr, rel_err


def csr_identity(n):
    return CsrMatrix(n, n, np.arange(n + 1), np.arange(n), np.ones(n))


# ----------------------------------------------------------------------
# CsrMatrix construction and validation
# ----------------------------------------------------------------------


def test_from_dense_roundtrip(rng):
    dense = rng.random((5, 7)) * (rng.random((5, 7)) < 0.4)
    a = CsrMatrix.from_dense(dense)
    assert np.array_equal(a.to_dense(), dense)


def test_from_coo_sums_duplicates():
    a = CsrMatrix.from_coo(2, 2, [0, 0, 1], [1, 1, 0], [2.0, 3.0, 1.0])
    assert a.nnz == 2
    assert a.to_dense()[0, 1] == 5.0


def test_validation_rejects_bad_row_ptr():
    with pytest.raises(ShapeError):
        CsrMatrix(2, 2, np.array([0, 1]), np.array([0]), np.array([1.0]))
    with pytest.raises(ShapeError):
        CsrMatrix(2, 2, np.array([0, 2, 1]), np.array([0, 1]), np.ones(2))


def test_validation_rejects_bad_columns():
    with pytest.raises(ShapeError):
        CsrMatrix(2, 2, np.array([0, 1, 2]), np.array([0, 5]), np.ones(2))
    with pytest.raises(ShapeError):  # decreasing inside a row
        CsrMatrix(1, 3, np.array([0, 2]), np.array([2, 0]), np.ones(2))
    # a decrease at a row boundary is fine
    CsrMatrix(2, 3, np.array([0, 1, 2]), np.array([2, 0]), np.ones(2))


def test_unit_value_flag():
    assert csr_identity(3).has_unit_values
    a = CsrMatrix(1, 2, np.array([0, 2]), np.array([0, 1]), np.array([1.0, 2.0]))
    assert not a.has_unit_values


def test_dense_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        dense_matrix(np.array([[1.0, np.nan]]))


# ----------------------------------------------------------------------
# spmm
# ----------------------------------------------------------------------


def test_spmm_identity(rng):
    b = rng.random((3, 2))
    assert np.array_equal(spmm(csr_identity(3), b), b)


def test_spmm_single_entry():
    a = CsrMatrix(2, 2, np.array([0, 1, 1]), np.array([1]), np.array([2.0]))
    b = np.array([[1.0, 1.0], [3.0, 4.0]])
    assert np.array_equal(spmm(a, b), np.array([[6.0, 8.0], [0.0, 0.0]]))


def test_spmm_all_zero(rng):
    a = CsrMatrix(3, 3, np.zeros(4, dtype=np.int64), np.array([], dtype=np.int64), np.array([]))
    assert np.array_equal(spmm(a, rng.random((3, 2))), np.zeros((3, 2)))


def test_spmm_shape_error(rng):
    with pytest.raises(ShapeError):
        spmm(csr_identity(3), rng.random((4, 2)))


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(2, 12),
    m=st.integers(2, 12),
    k=st.integers(1, 5),
    density=st.floats(0.05, 0.9),
    seed=st.integers(0, 10_000),
)
def test_spmm_matches_dense_oracle(n, m, k, density, seed):
    rng = np.random.default_rng(seed)
    a = random_csr(rng, n, m, density)
    b = rng.standard_normal((m, k))
    assert rel_err(spmm(a, b), a.to_dense() @ b) < 1e-10


# ----------------------------------------------------------------------
# spmm_unweighted
# ----------------------------------------------------------------------


def test_spmm_unweighted_identity_pattern(rng):
    b = rng.random((4, 3))
    assert np.array_equal(spmm_unweighted(csr_identity(4), b), b)


def test_spmm_unweighted_row_sum():
    a = CsrMatrix(1, 3, np.array([0, 2]), np.array([1, 2]), np.ones(2))
    b = np.array([[9.0, 9.0], [1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(spmm_unweighted(a, b), np.array([[4.0, 6.0]]))


def test_spmm_unweighted_equals_unit_weighted(rng):
    a = random_csr(rng, 50, 50, 0.2)
    ones = a.with_values(np.ones(a.nnz))
    b = rng.standard_normal((50, 8))
    # bit-identical: same per-row accumulation order
    assert np.array_equal(spmm_unweighted(a, b), spmm(ones, b))


def test_spmm_unweighted_never_reads_values(rng):
    a = random_csr(rng, 20, 20, 0.3, unit_values=True)
    b = rng.standard_normal((20, 4))
    expected = spmm(a, b)
    a.values[:] = np.nan  # poison; any read would propagate
    assert np.array_equal(spmm_unweighted(a, b), expected)


# ----------------------------------------------------------------------
# sddmm
# ----------------------------------------------------------------------


def test_sddmm_empty(rng):
    a = CsrMatrix(3, 3, np.zeros(4, dtype=np.int64), np.array([], dtype=np.int64), np.array([]))
    out = sddmm(a, rng.random((3, 2)), rng.random((3, 2)))
    assert out.nnz == 0


def test_sddmm_multiplicative_identity(rng):
    a = random_csr(rng, 4, 4, 0.5)
    ones = np.ones((4, 1))
    out = sddmm(a, ones, ones)
    assert np.array_equal(out.values, a.values)


def test_sddmm_matches_dense_oracle(rng):
    a = random_csr(rng, 4, 4, 0.5)
    b = rng.standard_normal((4, 3))
    c = rng.standard_normal((4, 3))
    expected = oracle_sddmm_dense(a.to_dense(), b, c)
    assert rel_err(sddmm(a, b, c).to_dense(), expected) < 1e-12


def test_sddmm_pattern_bit_identical(rng):
    a = random_csr(rng, 10, 6, 0.3)
    b = rng.standard_normal((10, 2))
    c = rng.standard_normal((6, 2))
    out = sddmm(a, b, c)
    assert out.row_ptr is a.row_ptr or np.array_equal(out.row_ptr, a.row_ptr)
    assert np.array_equal(out.col_idx, a.col_idx)


def test_sddmm_shape_errors(rng):
    a = random_csr(rng, 4, 5, 0.5)
    with pytest.raises(ShapeError):
        sddmm(a, rng.random((3, 2)), rng.random((5, 2)))
    with pytest.raises(ShapeError):
        sddmm(a, rng.random((4, 2)), rng.random((4, 2)))
    with pytest.raises(ShapeError):
        sddmm(a, rng.random((4, 2)), rng.random((5, 3)))


# ----------------------------------------------------------------------
# gemm / scale_rows
# ----------------------------------------------------------------------


def test_gemm_identity(rng):
    a = rng.random((3, 4))
    assert np.allclose(gemm(a, np.eye(4)), a)


def test_gemm_hand_case():
    out = gemm(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
    assert np.array_equal(out, np.array([[17.0], [39.0]]))


def test_gemm_zero(rng):
    assert np.array_equal(gemm(np.zeros((2, 3)), rng.random((3, 2))), np.zeros((2, 2)))


def test_gemm_matches_loop_oracle(rng):
    a = rng.standard_normal((6, 5))
    b = rng.standard_normal((5, 4))
    assert rel_err(gemm(a, b), oracle_matmul(a, b)) < 1e-13


def test_gemm_associativity_tolerance(rng):
    a, b, c = (rng.standard_normal((32, 32)) for _ in range(3))
    lhs = gemm(gemm(a, b), c)
    rhs = gemm(a, gemm(b, c))
    bound = 1e-6 * np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
    assert np.abs(lhs - rhs).max() <= bound


def test_scale_rows_ones(rng):
    b = rng.random((4, 3))
    assert np.array_equal(scale_rows(np.ones(4), b), b)


def test_scale_rows_hand_case():
    out = scale_rows(np.array([2.0, 3.0]), np.ones((2, 2)))
    assert np.array_equal(out, np.array([[2.0, 2.0], [3.0, 3.0]]))


def test_scale_rows_matches_diag_gemm(rng):
    d = rng.uniform(0.5, 2.0, 10)
    b = rng.standard_normal((10, 4))
    assert rel_err(scale_rows(d, b), np.diag(d) @ b) < 1e-14


def test_scale_rows_shape_error(rng):
    with pytest.raises(ShapeError):
        scale_rows(np.ones(3), rng.random((4, 2)))


# ----------------------------------------------------------------------
# add_self_loops / inv_sqrt_degrees
# ----------------------------------------------------------------------


def test_add_self_loops_empty():
    a = CsrMatrix(2, 2, np.zeros(3, dtype=np.int64), np.array([], dtype=np.int64), np.array([]))
    assert np.array_equal(add_self_loops(a).to_dense(), np.eye(2))


def test_add_self_loops_full_diagonal_unchanged(rng):
    a = CsrMatrix.from_dense(np.eye(4) + (rng.random((4, 4)) < 0.3))
    out = add_self_loops(a)
    assert np.array_equal(out.to_dense(), a.to_dense())


def test_add_self_loops_non_square():
    a = CsrMatrix(2, 3, np.zeros(3, dtype=np.int64), np.array([], dtype=np.int64), np.array([]))
    with pytest.raises(ShapeError):
        add_self_loops(a)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 15), density=st.floats(0.0, 0.8), seed=st.integers(0, 10_000))
def test_add_self_loops_counting_and_idempotent(n, density, seed):
    rng = np.random.default_rng(seed)
    a = random_csr(rng, n, n, density)
    missing = int((np.diag(a.to_dense()) == 0).sum())
    out = add_self_loops(a)
    assert out.nnz == a.nnz + missing
    again = add_self_loops(out)
    assert again.nnz == out.nnz
    assert np.array_equal(again.to_dense(), out.to_dense())


def test_inv_sqrt_degrees_identity():
    assert np.array_equal(inv_sqrt_degrees(csr_identity(5)), np.ones(5))


def test_inv_sqrt_degrees_hand_values(path3_tilde):
    out = inv_sqrt_degrees(path3_tilde)
    assert np.allclose(out, [2**-0.5, 3**-0.5, 2**-0.5])


def test_inv_sqrt_degree_four():
    a = CsrMatrix(1, 4, np.array([0, 4]), np.arange(4), np.ones(4))
    assert inv_sqrt_degrees(a)[0] == 0.5


def test_inv_sqrt_degrees_zero_row():
    a = CsrMatrix(2, 2, np.array([0, 1, 1]), np.array([0]), np.ones(1))
    with pytest.raises(DegenerateNodeError):
        inv_sqrt_degrees(a)
