"""Gibbs-sampling approximation of the posterior mean E[X | Y].

The full conditionals are conjugate: X given (P, R) is columnwise Gaussian
with the MAP mean and shared covariance (H^T R^-1 H + P^-1)^-1, while P and
R given X are inverse-Wishart with rank-updated scales and dof nu + N.  The
sweep loop is compiled; all randomness is drawn ahead of each block from the
caller's stream, so results are reproducible and worker-independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .distributions import RngStream, as_generator
from .errors import NotPositiveDefinite
from .estimators import estimate_mvu
from .model import ProblemSpec

BLOCK_SWEEPS = 8192


@dataclass(frozen=True)
class GibbsConfig:
    """Chain length controls; burn_in defaults to 10% of n_samples."""

    n_samples: int
    burn_in: int | None = None
    rng: RngStream | np.random.Generator | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return self.n_samples // 10


@njit(cache=True)
def _chol_inplace(a, out):
    p = a.shape[0]
    for i in range(p):
        for j in range(p):
            out[i, j] = 0.0
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if s <= 0.0:
            return False
        out[j, j] = np.sqrt(s)
        inv = 1.0 / out[j, j]
        for i in range(j + 1, p):
            t = a[i, j]
            for k in range(j):
                t -= out[i, k] * out[j, k]
            out[i, j] = t * inv
    return True


@njit(cache=True)
def _solve_lower(L, B):
    p, q = B.shape
    for col in range(q):
        for i in range(p):
            s = B[i, col]
            for k in range(i):
                s -= L[i, k] * B[k, col]
            B[i, col] = s / L[i, i]


@njit(cache=True)
def _solve_lower_t(L, B):
    p, q = B.shape
    for col in range(q):
        for i in range(p - 1, -1, -1):
            s = B[i, col]
            for k in range(i + 1, p):
                s -= L[k, i] * B[k, col]
            B[i, col] = s / L[i, i]


@njit(cache=True)
def _sweep_block(
    H, Y, U, Cx, Cw, X, P, R,
    z_x, z_ax, z_aw, chi_x, chi_w,
    skip, x_sum,
):
    """Run one block of sweeps; returns (ok, count, X, P, R) chain state."""
    m, n = H.shape
    N = Y.shape[1]
    sweeps = z_x.shape[0]
    cR = np.empty((m, m))
    cP = np.empty((n, n))
    cG = np.empty((n, n))
    cS = np.empty((m, m))
    Ax = np.empty((n, n))
    Aw = np.empty((m, m))
    count = 0
    for s in range(sweeps):
        # X | P, R: columnwise Gaussian, one shared factorization per sweep
        if not _chol_inplace(R, cR):
            return False, count, X, P, R
        rhs_m = np.empty((m, n + N))
        rhs_m[:, :n] = H
        rhs_m[:, n:] = Y
        _solve_lower(cR, rhs_m)
        _solve_lower_t(cR, rhs_m)
        if not _chol_inplace(P, cP):
            return False, count, X, P, R
        rhs_n = np.empty((n, n + N))
        for i in range(n):
            for j in range(n):
                rhs_n[i, j] = 1.0 if i == j else 0.0
        rhs_n[:, n:] = U
        _solve_lower(cP, rhs_n)
        _solve_lower_t(cP, rhs_n)
        G = H.T @ rhs_m[:, :n] + rhs_n[:, :n]
        for i in range(n):
            for j in range(i + 1, n):
                v = 0.5 * (G[i, j] + G[j, i])
                G[i, j] = v
                G[j, i] = v
        if not _chol_inplace(G, cG):
            return False, count, X, P, R
        # rhs_m[:, n:] holds R^-1 Y and rhs_n[:, n:] holds P^-1 U
        mean = H.T @ rhs_m[:, n:] + rhs_n[:, n:]
        _solve_lower(cG, mean)
        _solve_lower_t(cG, mean)
        Z = z_x[s].copy()
        _solve_lower_t(cG, Z)
        X = mean + Z
        # P | X: inverse-Wishart with signal outer-product update
        E = X - U
        Sx = Cx + E @ E.T
        if not _chol_inplace(Sx, cP):
            return False, count, X, P, R
        for i in range(n):
            for j in range(n):
                Ax[i, j] = 0.0
        k = 0
        for i in range(n):
            for j in range(i):
                Ax[i, j] = z_ax[s, k]
                k += 1
            Ax[i, i] = np.sqrt(chi_x[s, i])
        Zt = cP.T.copy()
        _solve_lower(Ax, Zt)
        P = Zt.T @ Zt
        # R | X: inverse-Wishart with residual outer-product update
        Ew = Y - H @ X
        Sw = Cw + Ew @ Ew.T
        if not _chol_inplace(Sw, cS):
            return False, count, X, P, R
        for i in range(m):
            for j in range(m):
                Aw[i, j] = 0.0
        k = 0
        for i in range(m):
            for j in range(i):
                Aw[i, j] = z_aw[s, k]
                k += 1
            Aw[i, i] = np.sqrt(chi_w[s, i])
        Zt2 = cS.T.copy()
        _solve_lower(Aw, Zt2)
        R = Zt2.T @ Zt2
        if s >= skip:
            x_sum += X
            count += 1
    return True, count, X, P, R


def gibbs_posterior_mean(spec: ProblemSpec, Y: np.ndarray, cfg: GibbsConfig) -> np.ndarray:
    """Average of post-burn-in X sweeps, cycling X -> P -> R.

    The chain starts from the MVU estimate with nominal covariances, so a
    short burn-in suffices.  Deterministic given ``cfg.rng``.
    """
    if cfg.rng is None:
        raise ValueError("GibbsConfig.rng is required")
    gen = as_generator(cfg.rng)
    m, n, N = spec.m, spec.n, spec.N
    burn = cfg.effective_burn_in
    total = burn + cfg.n_samples

    X = np.ascontiguousarray(estimate_mvu(spec, Y))
    P = np.ascontiguousarray(spec.P0)
    R = np.ascontiguousarray(spec.R0)
    x_sum = np.zeros((n, N))
    dof_x = spec.nu_x + N - np.arange(n)
    dof_w = spec.nu_w + N - np.arange(m)
    Cx = np.ascontiguousarray(spec.C_x)
    Cw = np.ascontiguousarray(spec.C_w)
    H = np.ascontiguousarray(spec.H)
    U = np.ascontiguousarray(spec.U)
    Yc = np.ascontiguousarray(Y)

    done = 0
    accumulated = 0
    while done < total:
        sweeps = min(BLOCK_SWEEPS, total - done)
        z_x = gen.standard_normal((sweeps, n, N))
        z_ax = gen.standard_normal((sweeps, n * (n - 1) // 2))
        z_aw = gen.standard_normal((sweeps, m * (m - 1) // 2))
        chi_x = gen.chisquare(dof_x, size=(sweeps, n))
        chi_w = gen.chisquare(dof_w, size=(sweeps, m))
        skip = max(0, burn - done)
        ok, count, X, P, R = _sweep_block(
            H, Yc, U, Cx, Cw, X, P, R, z_x, z_ax, z_aw, chi_x, chi_w, skip, x_sum
        )
        if not ok:
            raise NotPositiveDefinite("Gibbs sweep hit a non-positive-definite scale")
        accumulated += count
        done += sweeps
    return x_sum / accumulated
