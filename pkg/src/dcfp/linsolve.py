"""Dense and sparse direct solvers with residual reporting."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-9


class SingularSystemError(RuntimeError):
    """Raised when a factorization breaks down or the residual is unacceptable."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual_inf={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolveReport:
    residual_inf: float
    factor_time: float
    solve_time: float
    nnz_factor: int = 0
    method: str = "dense"


def as_csr(a) -> sp.csr_matrix:
    """Canonical CSR copy of ``a`` with structural invariants checked."""
    a = sp.csr_matrix(a)
    a.sum_duplicates()
    a.sort_indices()
    check_csr(a)
    return a


def check_csr(a: sp.csr_matrix) -> None:
    n_rows, n_cols = a.shape
    if n_rows != n_cols:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    offsets, cols = a.indptr, a.indices
    if offsets[0] != 0 or offsets[-1] != len(cols) or np.any(np.diff(offsets) < 0):
        raise ValueError("row offsets are inconsistent")
    if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError("column index out of range")
    if len(cols) > 1:
        within_row = np.ones(len(cols) - 1, dtype=bool)
        starts = offsets[1:-1]
        starts = starts[(starts > 0) & (starts < len(cols))]
        within_row[starts - 1] = False
        if np.any((np.diff(cols) <= 0) & within_row):
            raise ValueError("column indices within a row are not strictly increasing")


def _residual(a, x, b) -> float:
    return float(np.max(np.abs(a @ x - b))) if len(b) else 0.0


def solve_dense(a, b, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, SolveReport]:
    """LU with partial pivoting (LAPACK getrf/getrs)."""
    a = np.asarray(a.toarray() if sp.issparse(a) else a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError(f"shapes {a.shape} and {b.shape} are not conformal")
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        # singularity is reported below as SingularSystemError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    t1 = time.perf_counter()
    if np.any(np.diag(lu) == 0.0):
        raise SingularSystemError("matrix is exactly singular")
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    t2 = time.perf_counter()
    res = _residual(a, x, b)
    if not np.isfinite(res) or res > tol:
        raise SingularSystemError("dense solve did not reach the residual tolerance", res)
    return x, SolveReport(res, t1 - t0, t2 - t1, 0, "dense")


def solve_sparse(a, b, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, SolveReport]:
    """SuperLU with a minimum-degree ordering on the pattern of A^T + A."""
    a = as_csr(a)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"shapes {a.shape} and {b.shape} are not conformal")
    t0 = time.perf_counter()
    try:
        lu = spla.splu(a.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    t1 = time.perf_counter()
    x = lu.solve(b)
    t2 = time.perf_counter()
    res = _residual(a, x, b)
    if not np.isfinite(res) or res > tol:
        raise SingularSystemError("sparse solve did not reach the residual tolerance", res)
    return x, SolveReport(res, t1 - t0, t2 - t1, int(lu.L.nnz + lu.U.nnz), "sparse")
