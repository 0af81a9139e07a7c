"""Symmetric positive definite matrix utilities.

Everything downstream (samplers, estimators, the Gibbs chain) funnels its
factorizations through :func:`spd_cholesky`, which applies a single guarded
jitter retry before declaring a matrix indefinite.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite

# Relative pivot threshold and jitter size, both scaled by trace/dim.
PIVOT_RTOL = 1e-12
JITTER_RTOL = 1e-10
SYM_ATOL = 1e-10


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetrize a matrix (averages away roundoff skew)."""
    return 0.5 * (a + a.T)


def is_symmetric(a: np.ndarray, atol: float = SYM_ATOL) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(
        np.all(np.abs(a - a.T) <= atol)
    )


def _raw_cholesky(a: np.ndarray, pivot_floor: float) -> np.ndarray | None:
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    # numpy succeeds on barely-positive pivots; enforce the explicit floor
    if np.min(np.diagonal(lower)) ** 2 <= pivot_floor:
        return None
    return lower


def spd_cholesky(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix with one jittered retry.

    A pivot is rejected when it falls at or below 1e-12 * trace/dim.  On
    rejection, 1e-10 * trace/dim is added to the diagonal once; a second
    failure raises :class:`NotPositiveDefinite`.
    """
    a = np.asarray(a, dtype=float)
    if not is_symmetric(a):
        raise NotPositiveDefinite(f"{name} is not symmetric within {SYM_ATOL:g}")
    scale = np.trace(a) / a.shape[0]
    if not np.isfinite(scale) or scale <= 0.0:
        raise NotPositiveDefinite(f"{name} has non-positive trace")
    lower = _raw_cholesky(a, PIVOT_RTOL * scale)
    if lower is None:
        jittered = a + (JITTER_RTOL * scale) * np.eye(a.shape[0])
        lower = _raw_cholesky(jittered, PIVOT_RTOL * scale)
        if lower is None:
            raise NotPositiveDefinite(f"{name} failed Cholesky even after jitter")
    return lower


def require_spd(a: np.ndarray, name: str = "matrix", dim: int | None = None) -> np.ndarray:
    """Validate the SPD contract (square, symmetric, factorizable)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotPositiveDefinite(f"{name} must be square, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise NotPositiveDefinite(f"{name} must be {dim}x{dim}, got {a.shape}")
    spd_cholesky(a, name)
    return a


def chol_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b from a precomputed lower factor."""
    y = solve_triangular(lower, b, lower=True, check_finite=False)
    return solve_triangular(lower, y, lower=True, trans="T", check_finite=False)


def spd_solve(a: np.ndarray, b: np.ndarray, name: str = "matrix") -> np.ndarray:
    return chol_solve(spd_cholesky(a, name), b)


def chol_logdet(lower: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diagonal(lower))))


def spd_inverse(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    lower = spd_cholesky(a, name)
    return sym(chol_solve(lower, np.eye(a.shape[0])))
