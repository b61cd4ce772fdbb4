import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from twosed.errors import DimError, InvalidMatrix, NotPSD
from twosed.linalg import (
    JACOBI_MAX_DIM,
    Spectrum,
    as_sym,
    fisher_norm,
    jacobi_eigen,
    logdet_one_plus_scaled_sqrt,
    psd_clamp,
    sym_eigen,
)


def random_sym(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


def test_identity_eigenvalues():
    np.testing.assert_array_equal(sym_eigen(np.eye(3)).eigenvalues, [1.0, 1.0, 1.0])


def test_zero_eigenvalues():
    np.testing.assert_array_equal(sym_eigen(np.zeros((4, 4))).eigenvalues, np.zeros(4))


def test_two_by_two_matches_characteristic_roots():
    # lambda^2 - tr*lambda + det = 0, solved by the quadratic formula
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    tr, det = m[0, 0] + m[1, 1], m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = math.sqrt(tr * tr - 4 * det)
    oracle = sorted([(tr - disc) / 2, (tr + disc) / 2])
    assert oracle == [1.0, 3.0]
    np.testing.assert_allclose(sym_eigen(m).eigenvalues, oracle, atol=1e-14)


def test_non_finite_rejected():
    with pytest.raises(InvalidMatrix):
        sym_eigen(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InvalidMatrix):
        sym_eigen(np.ones((2, 3)))


def test_as_sym_is_exactly_symmetric():
    rng = np.random.default_rng(0)
    a = as_sym(rng.standard_normal((6, 6)))
    assert np.array_equal(a, a.T)


@pytest.mark.parametrize("n", [1, 2, 5, 13, 20])
@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_trace_and_lu_determinant(n, method):
    rng = np.random.default_rng(100 + n)
    m = random_sym(rng, n)
    w = sym_eigen(m, method=method).eigenvalues
    assert np.all(np.diff(w) >= 0)
    assert abs(w.sum() - np.trace(m)) <= 1e-8 * max(1.0, abs(np.trace(m)))
    p, lower, upper = scipy.linalg.lu(m)
    det_lu = np.linalg.det(p) * np.prod(np.diag(upper))
    assert abs(np.prod(w) - det_lu) <= 1e-6 * abs(det_lu)


@pytest.mark.parametrize("n", [3, 8, 20])
def test_reconstruction_and_orthonormal_basis(n):
    rng = np.random.default_rng(n)
    m = random_sym(rng, n)
    s = sym_eigen(m, keep_basis=True, method="jacobi")
    b = s.basis
    assert np.max(np.abs(b.T @ b - np.eye(n))) <= 1e-10
    err = np.linalg.norm(b @ np.diag(s.eigenvalues) @ b.T - m)
    assert err <= 1e-9 * (1 + np.linalg.norm(m))


def test_jacobi_agrees_with_lapack():
    rng = np.random.default_rng(7)
    for n in (2, 6, JACOBI_MAX_DIM):
        m = random_sym(rng, n)
        np.testing.assert_allclose(jacobi_eigen(m)[0], np.linalg.eigvalsh(m), atol=1e-10)


def test_jacobi_handles_tiny_off_diagonal():
    m = np.array([[1.0, 1e-200], [1e-200, 2.0]])
    w, _ = jacobi_eigen(m)
    np.testing.assert_allclose(w, [1.0, 2.0])


def test_deterministic():
    rng = np.random.default_rng(3)
    m = random_sym(rng, 9)
    assert np.array_equal(sym_eigen(m).eigenvalues, sym_eigen(m.copy()).eigenvalues)


def test_psd_clamp_examples():
    np.testing.assert_array_equal(psd_clamp(Spectrum(np.array([-1e-14, 0.5]))).eigenvalues, [0.0, 0.5])
    np.testing.assert_array_equal(psd_clamp(Spectrum(np.zeros(2))).eigenvalues, [0.0, 0.0])
    with pytest.raises(NotPSD):
        psd_clamp(Spectrum(np.array([-0.1, 0.5])))


def test_logdet_examples():
    assert logdet_one_plus_scaled_sqrt(np.zeros(5), 123.0) == 0.0
    assert logdet_one_plus_scaled_sqrt(np.ones(3), 1.0) == pytest.approx(3 * math.log(2), rel=1e-15)
    assert logdet_one_plus_scaled_sqrt(np.array([4.0]), 10.0) == pytest.approx(math.log(21), rel=1e-15)


def test_logdet_no_overflow_at_large_scale():
    v = logdet_one_plus_scaled_sqrt(np.full(3000, 1e6), 1e12)
    assert np.isfinite(v) and v > 0


@given(st.lists(st.floats(0, 1e6), min_size=0, max_size=30))
def test_logdet_zero_scale_is_zero(eigs):
    assert logdet_one_plus_scaled_sqrt(np.array(eigs), 0.0) == 0.0


def test_fisher_norm_examples():
    assert fisher_norm(np.eye(2), [3, 4]) == pytest.approx(5.0)
    assert fisher_norm(np.zeros((2, 2)), [7, -1]) == 0.0
    # direct expansion: 4*1*1 + 9*1*1 = 13
    assert fisher_norm(np.diag([4.0, 9.0]), [1, 1]) == pytest.approx(math.sqrt(13), rel=1e-15)
    with pytest.raises(DimError):
        fisher_norm(np.eye(2), [1, 2, 3])


@settings(max_examples=200)
@given(st.integers(1, 6), st.integers(0, 10 ** 6), st.floats(-1e3, 1e3))
def test_fisher_norm_homogeneous(n, seed, t):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    m = g @ g.T
    v = rng.standard_normal(n)
    lhs, rhs = fisher_norm(m, t * v), abs(t) * fisher_norm(m, v)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, rhs)
