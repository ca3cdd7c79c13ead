"""Sparse and dense linear algebra used by every assembled operator.

Sparse storage is backed by ``scipy.sparse.csr_matrix`` and direct solves by
SuperLU (``scipy.sparse.linalg.splu``).  The generalized eigensolver reduces
``J psi = lambda M psi`` to a standard problem through a Cholesky factor of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

CsrMatrix = sp.csr_matrix


class SingularMatrixError(RuntimeError):
    """Raised when a direct factorization meets a (numerically) singular pivot."""


class NotSPDError(RuntimeError):
    """Raised when a mass matrix fails its Cholesky factorization."""


def csr_from_triplets(
    nrows: int, ncols: int, triplets: Iterable[Sequence[float]]
) -> sp.csr_matrix:
    """Build a canonical CSR matrix, summing duplicate entries.

    Args:
        nrows: Number of rows.
        ncols: Number of columns.
        triplets: Iterable of ``(row, col, value)``.

    Returns:
        CSR matrix with sorted column indices and no duplicate entries.

    Raises:
        IndexError: If any index is outside the matrix shape.
    """
    trip = list(triplets)
    if trip:
        arr = np.asarray(trip, dtype=float)
        rows = arr[:, 0].astype(np.int64)
        cols = arr[:, 1].astype(np.int64)
        vals = arr[:, 2]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return csr_from_arrays(nrows, ncols, rows, cols, vals)


def csr_from_arrays(nrows: int, ncols: int, rows, cols, vals) -> sp.csr_matrix:
    """Array version of :func:`csr_from_triplets` used by the assemblers."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if nrows < 0 or ncols < 0:
        raise ValueError("matrix dimensions must be non-negative")
    if rows.size:
        if rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols:
            raise IndexError(f"triplet index out of range for shape ({nrows}, {ncols})")
    A = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with an explicit dimension check."""
    x = np.asarray(x)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has length {x.shape[0]}")
    return A @ x


@dataclass(frozen=True)
class LuFactorization:
    """Reusable sparse LU factorization of a square matrix."""

    shape: tuple
    _lu: spla.SuperLU

    def solve(self, b: np.ndarray) -> np.ndarray:
        return lu_solve(self, b)


def lu_factorize(A) -> LuFactorization:
    """Factorize a square sparse matrix once for repeated solves.

    Raises:
        ValueError: If ``A`` is not square.
        SingularMatrixError: If SuperLU reports an exactly singular factor.
    """
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"LU needs a square matrix, got {A.shape}")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and (diag.min() <= 1e-14 * max(diag.max(), 1.0) or not np.all(np.isfinite(diag))):
        raise SingularMatrixError("numerically singular pivot in LU factorization")
    return LuFactorization(A.shape, lu)


def lu_solve(F: LuFactorization, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.shape[0]:
        raise ValueError("right-hand side has the wrong length")
    return F._lu.solve(b)


def dense_generalized_eig(M, J, vectors: bool = True):
    """Solve ``J psi = lambda M psi`` for SPD ``M``.

    With ``M = L L^T`` the problem becomes ``(L^-1 J L^-T) v = lambda v`` and
    ``psi = L^-T v``.  When ``J`` is exactly skew the reduced matrix is skew as
    well, so ``i * A`` is Hermitian and ``eigh`` returns purely imaginary
    eigenvalues.  Any other ``J`` goes through the general ``eig`` routine.

    Returns:
        ``(eigenvalues, eigenvectors)`` with eigenvectors as columns (``None``
        when ``vectors`` is false).  Eigenvalues are sorted by imaginary part.

    Raises:
        NotSPDError: If the Cholesky factorization of ``M`` fails.
    """
    M = _dense(M)
    J = _dense(J)
    if M.shape != J.shape or M.shape[0] != M.shape[1]:
        raise ValueError("M and J must be square of equal size")
    try:
        Lc = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("mass matrix is not symmetric positive definite") from exc
    tmp = scipy.linalg.solve_triangular(Lc, J, lower=True)
    A = scipy.linalg.solve_triangular(Lc, tmp.T, lower=True).T
    if np.array_equal(J, -J.T):
        A = 0.5 * (A - A.T)
        H = 1j * A
        if vectors:
            w, V = scipy.linalg.eigh(H)
        else:
            w = scipy.linalg.eigh(H, eigvals_only=True)
            V = None
        lam = -1j * w
    else:
        if vectors:
            lam, V = scipy.linalg.eig(A)
        else:
            lam = scipy.linalg.eigvals(A)
            V = None
        order = np.argsort(lam.imag, kind="stable")
        lam = lam[order]
        V = V[:, order] if V is not None else None
    if V is not None:
        V = scipy.linalg.solve_triangular(Lc.T, V, lower=False)
    return lam, V


def _dense(A) -> np.ndarray:
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)


def skew_defect(J) -> float:
    """Return ``max |J + J^T|`` (exactly 0 for a structurally skew matrix)."""
    if sp.issparse(J):
        D = (J + J.T).tocsr()
        D.eliminate_zeros()
        return float(np.max(np.abs(D.data))) if D.nnz else 0.0
    J = np.asarray(J)
    return float(np.max(np.abs(J + J.T))) if J.size else 0.0


def export_matrix_market(A, path) -> None:
    """Write a matrix in Matrix Market coordinate format (debugging aid)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
