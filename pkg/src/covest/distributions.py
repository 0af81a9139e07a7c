"""Seeded random streams and Gaussian / inverse-Wishart sampling.

Streams are counter-based (Philox) and keyed by a (seed, stream) pair so a
trial's draws depend only on its own identifiers, never on scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import multigammaln

from .errors import NotPositiveDefinite
from .linalg import chol_logdet, require_spd, spd_cholesky, sym


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (seed, stream).

    Equal identifiers always reproduce the same sample sequence; distinct
    stream ids give statistically independent streams.  ``lane`` carves out
    independent sub-streams for consumers that must not share draws (e.g.
    the scenario draw versus a Gibbs chain inside one trial).
    """

    seed: int
    stream: int = 0

    def generator(self, lane: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, lane))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept either an RngStream or a live numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class InverseWishartParams:
    """Scale matrix C and degrees of freedom nu, with nu > dim + 1.

    The dof bound guarantees a finite mean C / (nu - dim - 1).
    """

    scale: np.ndarray
    dof: float

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=float)
        require_spd(scale, "inverse-Wishart scale")
        object.__setattr__(self, "scale", scale)
        if not self.dof > scale.shape[0] + 1:
            raise ValueError(
                f"dof must exceed dim + 1 = {scale.shape[0] + 1}, got {self.dof}"
            )

    @property
    def dim(self) -> int:
        return self.scale.shape[0]

    def mean(self) -> np.ndarray:
        return self.scale / (self.dof - self.dim - 1)

    def mode(self) -> np.ndarray:
        return self.scale / (self.dof + self.dim + 1)


def sample_gaussian(mean: np.ndarray, cov: np.ndarray, rng) -> np.ndarray:
    """Draw mean + L z with z standard normal and L the Cholesky factor."""
    gen = as_generator(rng)
    mean = np.asarray(mean, dtype=float)
    lower = spd_cholesky(np.asarray(cov, dtype=float), "covariance")
    return mean + lower @ gen.standard_normal(mean.shape[0])


def _bartlett_lower(dim: int, dof: float, gen: np.random.Generator) -> np.ndarray:
    """Lower-triangular Bartlett factor A with A A^T ~ Wishart(I, dof)."""
    a = np.zeros((dim, dim))
    rows, cols = np.tril_indices(dim, -1)
    a[rows, cols] = gen.standard_normal(rows.size)
    a[np.diag_indices(dim)] = np.sqrt(gen.chisquare(dof - np.arange(dim)))
    return a


def sample_inverse_wishart(params: InverseWishartParams, rng) -> np.ndarray:
    """Sample from the inverse-Wishart via a Bartlett-factored Wishart.

    With C = L L^T and A the Bartlett factor at the given dof, the inverse
    of a Wishart(C^-1, dof) draw is (L A^-T)(L A^-T)^T, which is returned
    directly without forming the Wishart draw.
    """
    gen = as_generator(rng)
    lower = spd_cholesky(params.scale, "inverse-Wishart scale")
    a = _bartlett_lower(params.dim, params.dof, gen)
    # Z^T = A^-1 L^T  =>  sample = Z Z^T
    zt = solve_triangular(a, lower.T, lower=True, check_finite=False)
    return sym(zt.T @ zt)


def logpdf_inverse_wishart(x: np.ndarray, params: InverseWishartParams) -> float:
    """Log-density including the full normalizing constant."""
    x = np.asarray(x, dtype=float)
    p = params.dim
    if x.shape != (p, p):
        raise NotPositiveDefinite(f"x must be {p}x{p}, got {x.shape}")
    lx = spd_cholesky(x, "inverse-Wishart argument")
    lc = spd_cholesky(params.scale, "inverse-Wishart scale")
    nu = params.dof
    # tr(C X^-1) through triangular solves against both factors
    t = solve_triangular(lx, lc, lower=True, check_finite=False)
    trace_term = float(np.sum(t * t))
    return (
        0.5 * nu * chol_logdet(lc)
        - 0.5 * nu * p * np.log(2.0)
        - multigammaln(0.5 * nu, p)
        - 0.5 * (nu + p + 1) * chol_logdet(lx)
        - 0.5 * trace_term
    )
