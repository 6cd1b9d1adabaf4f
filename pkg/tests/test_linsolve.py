# tests/test_linsolve.py
import numpy as np
import pytest
import scipy.sparse as sp

from core.exceptions import NotPositiveDefiniteError, SingularMatrixError
from services.assembly_service import x_inner_matrix
from services.linsolve_service import (
    dual_norm,
    factorize,
    hpd_factorize,
    riesz_representation,
    solve_sparse,
    x_inner,
    x_norm,
)


def _random_system(n=12, seed=1):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + n * np.eye(n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    return sp.csr_matrix(A), b


def test_solve_matches_dense():
    A, b = _random_system()
    np.testing.assert_allclose(solve_sparse(A, b), np.linalg.solve(A.toarray(), b), rtol=1e-12)


def test_factorization_is_reusable_and_solves_blocks():
    A, b = _random_system()
    factor = factorize(A)
    B = np.column_stack([b, 2 * b])
    x = factor.solve(B)
    np.testing.assert_allclose(x[:, 1], 2 * factor.solve(b), rtol=1e-12)
    assert factor.solve_ops > 0


def test_singular_matrix():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        solve_sparse(A, np.array([1.0, 0.0]))


def test_rhs_size_mismatch():
    A, _ = _random_system()
    with pytest.raises(ValueError):
        factorize(A).solve(np.ones(3))


def test_empty_system():
    x = solve_sparse(sp.csr_matrix((0, 0)), np.zeros(0))
    assert x.shape == (0,)


def test_hpd_rejects_non_hermitian():
    with pytest.raises(NotPositiveDefiniteError, match="not Hermitian"):
        hpd_factorize(np.array([[2.0, 1.0], [0.0, 2.0]]))


def test_hpd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        hpd_factorize(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_riesz_representation(square_mesh):
    X = x_inner_matrix(square_mesh)
    rng = np.random.default_rng(5)
    r = rng.normal(size=X.shape[0]) + 1j * rng.normal(size=X.shape[0])
    e = riesz_representation(X, r)
    # (e, v)_X = v^H r for every v
    for _ in range(3):
        v = rng.normal(size=X.shape[0]) + 1j * rng.normal(size=X.shape[0])
        assert x_inner(X, e, v) == pytest.approx(np.vdot(v, r), rel=1e-10)
    assert dual_norm(X, r) == pytest.approx(x_norm(X, e), rel=1e-10)


def test_dual_norm_of_x_image_is_the_x_norm(square_mesh):
    X = x_inner_matrix(square_mesh)
    u = np.linspace(0.0, 1.0, X.shape[0]) * (1 + 2j)
    assert dual_norm(hpd_factorize(X), X @ u) == pytest.approx(x_norm(X, u), rel=1e-10)
