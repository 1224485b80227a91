"""Tridiagonal matrices with an O(n) LU solve.

The whole spatial discretization lives on tridiagonal matrices, so a tiny
dedicated container beats generic sparse formats: banded storage, exact
symmetry checks, and a factor-once / solve-many split for time stepping.
"""

import numpy as np
from scipy.linalg import lapack

from .errors import NotSPDError, SingularSystemError


class Tridiagonal:
    """Square tridiagonal matrix stored as three bands.

    Parameters
    ----------
    lower : (n-1,) array
        Sub-diagonal entries ``A[i+1, i]``.
    diag : (n,) array
        Main diagonal.
    upper : (n-1,) array
        Super-diagonal entries ``A[i, i+1]``.
    """

    __slots__ = ("lower", "diag", "upper")

    def __init__(self, lower, diag, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.diag = np.asarray(diag, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        n = self.diag.shape[0]
        if self.lower.shape != (max(n - 1, 0),) or self.upper.shape != (max(n - 1, 0),):
            raise ValueError("band lengths inconsistent with diagonal")

    @property
    def shape(self):
        n = self.diag.shape[0]
        return (n, n)

    def matvec(self, v):
        """Return ``A @ v`` for a vector of matching length."""
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def matmat(self, other):
        """Return ``A @ B`` for a dense matrix ``B`` (columns are vectors)."""
        other = np.asarray(other, dtype=float)
        out = self.diag[:, None] * other
        out[:-1] += self.upper[:, None] * other[1:]
        out[1:] += self.lower[:, None] * other[:-1]
        return out

    def toarray(self):
        n = self.diag.shape[0]
        full = np.zeros((n, n))
        full[np.arange(n), np.arange(n)] = self.diag
        if n > 1:
            full[np.arange(1, n), np.arange(n - 1)] = self.lower
            full[np.arange(n - 1), np.arange(1, n)] = self.upper
        return full

    def restrict(self, start):
        """Principal submatrix dropping the first ``start`` rows/columns."""
        return Tridiagonal(self.lower[start:], self.diag[start:], self.upper[start:])

    def is_symmetric(self):
        return np.array_equal(self.lower, self.upper)

    def __add__(self, other):
        return Tridiagonal(self.lower + other.lower, self.diag + other.diag,
                           self.upper + other.upper)

    def __mul__(self, scalar):
        return Tridiagonal(self.lower * scalar, self.diag * scalar, self.upper * scalar)

    __rmul__ = __mul__

    def copy(self):
        return Tridiagonal(self.lower.copy(), self.diag.copy(), self.upper.copy())

    def factor(self):
        """LU-factorize once; the result solves many right-hand sides."""
        return TridiagonalLU(self)

    def cholesky_check(self):
        """Attempt the SPD factorization; raise :class:`NotSPDError` on failure.

        Uses the LDL^T routine for symmetric positive definite tridiagonal
        matrices, which fails cleanly on indefinite input.
        """
        if not self.is_symmetric():
            raise NotSPDError("matrix is not symmetric")
        _, _, info = lapack.dpttrf(self.diag, self.lower)
        if info != 0:
            raise NotSPDError(f"SPD factorization broke down at pivot {info}")


class TridiagonalLU:
    """LU factors of a tridiagonal matrix (LAPACK ``gttrf``/``gttrs``)."""

    __slots__ = ("_factors",)

    def __init__(self, matrix):
        dl, d, du, du2, ipiv, info = lapack.dgttrf(matrix.lower, matrix.diag,
                                                   matrix.upper)
        if info != 0:
            raise SingularSystemError(
                f"tridiagonal factorization singular at position {info}")
        self._factors = (dl, d, du, du2, ipiv)

    def solve(self, rhs):
        """Solve ``A x = rhs``; ``rhs`` may be a vector or a matrix of columns."""
        x, info = lapack.dgttrs(*self._factors, rhs)
        if info != 0:
            raise SingularSystemError("tridiagonal back-substitution failed")
        return x
