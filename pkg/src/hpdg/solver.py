"""Sparse solves of the complex (non-Hermitian, complex-symmetric) DG systems."""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .space import DGFunction


class SolverError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SolveReport:
    residual: float
    method: str
    refinements: int
    fill: int
    seconds: float
    converged: bool


def _relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    if nb == 0:
        return 0.0 if r == 0 else float("inf")
    return float(r / nb)


def solve(system, tol=1e-10, method="direct", max_refinements=3):
    """Solve ``system`` and return ``(DGFunction, SolveReport)``.

    ``method="direct"`` uses a sparse LU with iterative refinement;
    ``method="gmres"`` uses restarted GMRES with an incomplete LU preconditioner.
    Raises :class:`SolverError` when the factorization breaks down or the
    relative residual stays above ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = sps.csc_matrix(system.matrix, dtype=complex)
    b = np.asarray(system.rhs, dtype=complex)
    t0 = time.perf_counter()
    if not np.any(b):
        x = np.zeros_like(b)
        report = SolveReport(0.0, method, 0, 0, time.perf_counter() - t0, True)
        return DGFunction(system.space, x), report
    refinements = 0
    fill = 0
    if method == "direct":
        try:
            lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}", {"n": A.shape[0], "nnz": A.nnz}) from exc
        fill = int(lu.L.nnz + lu.U.nnz)
        x = lu.solve(b)
        res = _relative_residual(A, x, b)
        while res > tol * 1e-2 and refinements < max_refinements and np.isfinite(res):
            x = x + lu.solve(b - A @ x)
            refinements += 1
            res = _relative_residual(A, x, b)
        if not np.isfinite(res) or res > tol:
            diag = np.abs(lu.U.diagonal())
            raise SolverError(
                f"relative residual {res:.3e} exceeds {tol:.1e}",
                {"residual": res, "min_pivot": float(diag.min()), "max_pivot": float(diag.max())},
            )
    elif method == "gmres":
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
        x, info = spla.gmres(A, b, M=M, rtol=tol * 0.1, restart=200, maxiter=50)
        res = _relative_residual(A, x, b)
        if info != 0 or res > tol:
            raise SolverError(f"GMRES did not converge (info={info}, residual {res:.3e})", {"residual": res})
    else:
        raise ValueError(f"unknown method {method!r}")
    report = SolveReport(res, method, refinements, fill, time.perf_counter() - t0, True)
    return DGFunction(system.space, x), report
