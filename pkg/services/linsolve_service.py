# services/linsolve_service.py
from core.exceptions import NotPositiveDefiniteError, SingularMatrixError
from typing import Union
import logging
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10


class SparseFactorization:
    """
    Sparse LU factorization of a square complex matrix. Immutable after
    construction; solve() may be called any number of times.
    """

    def __init__(self, A, *, hermitian_pd: bool = False):
        A = sp.csc_matrix(A, dtype=np.complex128)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {A.shape}")
        self.shape = A.shape
        self.hermitian_pd = hermitian_pd
        self._A = A
        self._norm = float(spla.norm(A)) if A.nnz else 0.0
        self._lu = None
        if A.shape[0] == 0:
            return
        try:
            if hermitian_pd:
                self._lu = spla.splu(
                    A,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options=dict(SymmetricMode=True),
                )
            else:
                self._lu = spla.splu(A)
        except RuntimeError as e:
            if hermitian_pd:
                raise NotPositiveDefiniteError(f"Factorization of the inner-product matrix failed: {e}") from e
            raise SingularMatrixError(f"Sparse factorization failed for a {A.shape[0]}x{A.shape[0]} matrix: {e}") from e

        diag = self._lu.U.diagonal()
        if not np.all(np.isfinite(diag)) or np.any(diag == 0):
            raise SingularMatrixError(f"Matrix of size {A.shape[0]} is numerically singular (zero pivot).")
        if hermitian_pd:
            self._check_positive_pivots(diag)

    def _check_positive_pivots(self, diag: np.ndarray) -> None:
        # Symmetric permutation without row pivoting: positive pivots <=> positive definite.
        if not np.array_equal(self._lu.perm_r, self._lu.perm_c):
            raise NotPositiveDefiniteError("Row pivoting occurred; matrix is not Hermitian positive definite.")
        if np.any(diag.real <= 0) or np.any(np.abs(diag.imag) > 1e-12 * np.abs(diag.real)):
            raise NotPositiveDefiniteError("Non-positive pivot; matrix is not Hermitian positive definite.")

    @property
    def solve_ops(self) -> int:
        """Operation count of one forward/back substitution (2 per factor nonzero)."""
        if self._lu is None:
            return 0
        return 2 * int(self._lu.L.nnz + self._lu.U.nnz)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """
        Solves A x = b for one right-hand side (1-D) or several (2-D, columns).

        Raises:
            SingularMatrixError: If the result is not finite or the residual
                check fails.
        """
        b = np.asarray(b, dtype=np.complex128)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"Right-hand side of length {b.shape[0]} for a {self.shape[0]}x{self.shape[0]} system")
        if self._lu is None:
            return np.zeros_like(b)
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("Sparse solve produced non-finite values.")
        residual = self._A @ x - b
        res_norm = np.linalg.norm(residual)
        bound = RESIDUAL_TOLERANCE * (self._norm * np.linalg.norm(x) + np.linalg.norm(b))
        if res_norm > bound:
            raise SingularMatrixError(
                f"Sparse solve residual {res_norm:.3e} exceeds {bound:.3e}; matrix is singular to working precision."
            )
        return x


MatrixOrFactor = Union[SparseFactorization, sp.spmatrix, np.ndarray]


def factorize(A) -> SparseFactorization:
    return SparseFactorization(A)


def hpd_factorize(X) -> SparseFactorization:
    """
    Factorizes a Hermitian positive-definite matrix.

    Raises:
        NotPositiveDefiniteError: If X is not Hermitian or not positive definite.
    """
    X = sp.csr_matrix(X, dtype=np.complex128)
    if X.shape[0] and X.nnz:
        asym = spla.norm(X - X.conj().T)
        if asym > 1e-12 * spla.norm(X):
            raise NotPositiveDefiniteError(f"Matrix is not Hermitian (|X - X^H|_F = {asym:.3e}).")
    return SparseFactorization(X, hermitian_pd=True)


def solve_sparse(A, b: np.ndarray) -> np.ndarray:
    """
    Solves A x = b by sparse LU factorization.

    Raises:
        SingularMatrixError: If A is singular or structurally deficient.

    Returns:
        The solution x with |Ax - b| <= 1e-10 (|A|_F |x| + |b|).
    """
    return SparseFactorization(A).solve(b)


def as_hpd_factorization(X: MatrixOrFactor) -> SparseFactorization:
    if isinstance(X, SparseFactorization):
        return X
    return hpd_factorize(X)


def riesz_representation(X: MatrixOrFactor, r: np.ndarray) -> np.ndarray:
    """Riesz representative e = X^-1 r, i.e. (e, v)_X = v^H r for all v."""
    return as_hpd_factorization(X).solve(r)


def x_inner(X, u: np.ndarray, v: np.ndarray) -> complex:
    """Inner product (u, v)_X = v^H X u, conjugate-linear in v."""
    return complex(np.vdot(v, X @ u))


def x_norm(X, u: np.ndarray) -> float:
    return float(np.sqrt(max(np.real(np.vdot(u, X @ u)), 0.0)))


def dual_norm(X: MatrixOrFactor, r: np.ndarray) -> float:
    """Dual norm sqrt(Re(e^H r)) of a functional through its Riesz representative."""
    e = riesz_representation(X, r)
    return float(np.sqrt(max(np.real(np.vdot(e, r)), 0.0)))
