"""Sparse linear algebra for the discrete Biot operators.

Matrices are stored as scipy.sparse.csr_matrix with sorted, duplicate-free
column indices.  Two symmetric positive definite solve paths are provided: a
sparse direct factorization (factorized once, reused across right-hand
sides) and a Jacobi-preconditioned conjugate gradient iteration.  Both are
deterministic: repeated solves with identical inputs return identical bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .backend import kernels

_METHODS = ("direct-cholesky", "cg-jacobi")


@dataclass(frozen=True)
class SolverConfig:
    """Options for SPD solves.

    Attributes
    ----------
    method : str
        "direct-cholesky" for the sparse direct path, "cg-jacobi" for
        conjugate gradients with diagonal preconditioning.
    rtol : float
        Relative residual target for the iterative path.
    max_iter : int
        Iteration cap for the iterative path.
    """

    method: str = "direct-cholesky"
    rtol: float = 1e-10
    max_iter: int = 20000

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; "
                             f"expected one of {_METHODS}")
        if not (0 < self.rtol < 1):
            raise ValueError(f"rtol must lie in (0, 1), got {self.rtol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got "
                             f"{self.max_iter}")


class SolverFailure(RuntimeError):
    """Raised when a solve cannot reach its accuracy target.

    Attributes
    ----------
    residual : float
        Relative residual at failure, nan when unavailable.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


def spmv(matrix, x):
    """Sparse matrix-vector product through the active kernel backend.

    Parameters
    ----------
    matrix : scipy.sparse.csr_matrix
    x : ndarray

    Returns
    -------
    ndarray
    """
    if not sp.isspmatrix_csr(matrix):
        raise TypeError(f"expected a CSR matrix, got {type(matrix).__name__}")
    if matrix.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix is {matrix.shape}, "
                         f"vector has length {x.shape[0]}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.csr_matvec(matrix.indptr, matrix.indices, matrix.data, x)


class SpdSolver:
    """Reusable solver for a fixed SPD matrix.

    The direct path factorizes once at construction; the iterative path
    stores the Jacobi preconditioner.  solve() never mutates its inputs.
    """

    def __init__(self, matrix, config=None):
        self.config = config or SolverConfig()
        if not sp.isspmatrix_csr(matrix):
            matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {matrix.shape}")
        self.matrix = matrix
        self._n = matrix.shape[0]
        if self.config.method == "direct-cholesky":
            try:
                self._lu = spla.splu(matrix.tocsc())
            except RuntimeError as exc:
                raise SolverFailure(f"factorization failed: {exc}") from exc
            self._diag_inv = None
        else:
            diag = matrix.diagonal()
            if np.any(diag <= 0):
                bad = int(np.argmax(diag <= 0))
                raise SolverFailure(
                    f"nonpositive diagonal entry at row {bad}; "
                    "matrix is not positive definite")
            self._lu = None
            self._diag_inv = 1.0 / diag

    def solve(self, rhs):
        """Solve A x = rhs to the configured accuracy.

        Raises
        ------
        SolverFailure
            If the accuracy target cannot be met (iterative path), or if
            the direct solution fails a residual sanity check.
        """
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape != (self._n,):
            raise ValueError(f"rhs has shape {rhs.shape}, expected "
                             f"({self._n},)")
        norm_b = np.linalg.norm(rhs)
        if norm_b == 0.0:
            return np.zeros(self._n)
        if self._lu is not None:
            x = self._lu.solve(rhs)
            # Loose guard only: a backward-stable factorization of an
            # ill-conditioned matrix cannot do better than eps * cond(A).
            res = np.linalg.norm(self.matrix @ x - rhs) / norm_b
            if not res < 1e-6:
                raise SolverFailure(
                    f"direct solve residual {res:.3e} exceeds sanity bound; "
                    "matrix is singular or badly scaled", residual=res)
            return x
        return self._cg(rhs, norm_b)

    def _cg(self, rhs, norm_b):
        cfg = self.config
        mat = self.matrix
        x = np.zeros(self._n)
        r = rhs.copy()
        z = self._diag_inv * r
        d = z.copy()
        rz = r @ z
        target = cfg.rtol * norm_b
        for _ in range(cfg.max_iter):
            ad = spmv(mat, d)
            dad = d @ ad
            if dad <= 0.0:
                raise SolverFailure(
                    "nonpositive curvature encountered; matrix is not "
                    "positive definite",
                    residual=float(np.linalg.norm(r) / norm_b))
            alpha = rz / dad
            x += alpha * d
            r -= alpha * ad
            if np.linalg.norm(r) <= target:
                return x
            z = self._diag_inv * r
            rz_next = r @ z
            d = z + (rz_next / rz) * d
            rz = rz_next
        raise SolverFailure(
            f"conjugate gradients did not reach rtol={cfg.rtol:g} within "
            f"{cfg.max_iter} iterations",
            residual=float(np.linalg.norm(r) / norm_b))


def solve_spd(matrix, rhs, config=None):
    """One-shot SPD solve; see SpdSolver for the reusable form."""
    return SpdSolver(matrix, config).solve(rhs)
