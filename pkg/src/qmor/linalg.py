"""Dense matrix kernels used by the rest of the toolkit.

Factorizations are delegated to LAPACK through numpy/scipy; this module
owns the error contracts, the tolerance configuration, and the Lyapunov
solver (Kronecker vectorization, adequate at the state-space sizes used
here).  Matrices are plain numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    ConvergenceError,
    IndefiniteMatrixError,
    NotHurwitzError,
    ResidualError,
    SingularMatrixError,
)

__all__ = [
    "Tolerances",
    "DEFAULT_TOLS",
    "lu_solve",
    "eigenvalues",
    "svd",
    "symmetric_psd_sqrt_factor",
    "lyapunov_solve",
    "expm",
    "assert_hurwitz",
    "is_hurwitz",
]


@dataclass(frozen=True)
class Tolerances:
    """Central numerical tolerances (all relative unless noted)."""

    solve_residual: float = 1e-10
    symmetry: float = 1e-10
    indefinite: float = 1e-6          # most-negative eigenvalue allowed, rel to largest
    lyapunov_residual: float = 1e-8
    hurwitz_margin: float = 1e-10     # required margin, relative to ||A||_F
    rank: float = 1e-10               # singular values below rank*s1 count as zero
    minimality: float = 1e-12         # Hankel directions dropped below this
    expm_norm_limit: float = 1e6      # absolute guard


DEFAULT_TOLS = Tolerances()


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def lu_solve(a, b, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Solve a x = b by LU with partial pivoting; verifies the residual."""
    a = _as_2d(a)
    b_arr = np.asarray(b)
    b2 = _as_2d(b_arr)
    if a.shape[0] != a.shape[1]:
        raise ValueError("coefficient matrix must be square")
    if a.shape[0] != b2.shape[0]:
        raise ValueError("right-hand side has incompatible row count")
    try:
        x = np.linalg.solve(a, b2)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    scale = np.linalg.norm(b2) + np.linalg.norm(a) * np.linalg.norm(x)
    resid = np.linalg.norm(a @ x - b2)
    if scale > 0 and resid > 1e3 * tols.solve_residual * scale:
        raise SingularMatrixError(
            f"solution residual {resid:.3e} exceeds tolerance (matrix is "
            "singular to working precision)"
        )
    return x.reshape(b_arr.shape) if b_arr.ndim == 1 else x


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues of a square matrix (Hessenberg + shifted QR via
    LAPACK)."""
    a = _as_2d(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition a = u @ diag(s) @ vt, s descending."""
    a = _as_2d(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    return u, s, vt


def symmetric_psd_sqrt_factor(a, tol: float, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Factor L (full column rank) with L @ L.T ~= a for symmetric PSD a.

    Eigenvalues below tol*lambda_max are dropped; slightly negative ones
    are clipped to zero.  Raises if a is significantly indefinite.
    """
    a = _as_2d(a)
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.T) > tols.symmetry * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    lam_max = float(w[-1]) if n else 0.0
    if lam_max <= 0:
        return np.zeros((n, 0))
    if w[0] < -tols.indefinite * lam_max:
        raise IndefiniteMatrixError(
            f"matrix has eigenvalue {w[0]:.3e} below -{tols.indefinite:.1e} "
            f"* lambda_max ({lam_max:.3e})"
        )
    keep = w > tol * lam_max
    return v[:, keep] * np.sqrt(np.maximum(w[keep], 0.0))


def is_hurwitz(a, tols: Tolerances = DEFAULT_TOLS) -> bool:
    a = _as_2d(a)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return False
    return float(np.max(eigenvalues(a).real)) <= -tols.hurwitz_margin * norm


def assert_hurwitz(a, tols: Tolerances = DEFAULT_TOLS, what: str = "matrix") -> None:
    a = _as_2d(a)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise NotHurwitzError(f"{what} is zero, hence not Hurwitz")
    worst = float(np.max(eigenvalues(a).real))
    if worst > -tols.hurwitz_margin * norm:
        raise NotHurwitzError(
            f"{what} is not Hurwitz: max eigenvalue real part {worst:.3e} "
            f"(needs margin {-tols.hurwitz_margin * norm:.3e})"
        )


def lyapunov_solve(a, q, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Solve A P + P A^T + Q = 0 for symmetric Q and Hurwitz A.

    Vectorized to an n^2 x n^2 linear solve; the result is symmetrized and
    its residual checked against tols.lyapunov_residual.
    """
    a = _as_2d(a)
    q = _as_2d(q)
    n = a.shape[0]
    if a.shape != (n, n) or q.shape != (n, n):
        raise ValueError("A and Q must be square of matching size")
    qscale = np.linalg.norm(q)
    if qscale > 0 and np.linalg.norm(q - q.T) > tols.symmetry * qscale:
        raise ValueError("Q must be symmetric")
    assert_hurwitz(a, tols, what="Lyapunov coefficient matrix")
    eye = np.eye(n)
    kron = np.kron(eye, a) + np.kron(a, eye)
    vec = lu_solve(kron, -q.reshape(-1, order="F"), tols)
    p = vec.reshape((n, n), order="F")
    p = 0.5 * (p + p.T)
    resid = np.linalg.norm(a @ p + p @ a.T + q)
    if qscale > 0 and resid > tols.lyapunov_residual * qscale:
        raise ResidualError(
            f"Lyapunov residual {resid:.3e} exceeds {tols.lyapunov_residual:.1e}"
            f" * ||Q|| ({qscale:.3e})"
        )
    return p


def expm(a, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade), with a norm guard."""
    a = _as_2d(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    norm = np.linalg.norm(a, 1) if a.size else 0.0
    if not math.isfinite(norm) or norm > tols.expm_norm_limit:
        raise OverflowError(f"matrix norm {norm:.3e} too large for expm")
    return scipy.linalg.expm(a)
