"""Generative model: Y = H X + W with inverse-Wishart covariance priors.

A :class:`ProblemSpec` fixes the design matrix, prior means, nominal
covariances and the dof parameters controlling how certain those nominals
are.  The derived scale matrices C_x = (nu_x - n - 1) P0 and
C_w = (nu_w - m - 1) R0 center the priors so E[P] = P0 and E[R] = R0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .distributions import InverseWishartParams, as_generator, sample_inverse_wishart
from .errors import InvalidDimension, SchemaMismatch
from .linalg import require_spd, spd_cholesky

SPEC_SCHEMA_VERSION = 1

WEIGHT_MODES = ("cmap", "mmap")


def min_integer_dof(p: int) -> int:
    """Smallest integer dof with a finite inverse-Wishart mean."""
    return p + 2


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable problem definition.

    H       : m x n design matrix, full column rank
    U       : n x N prior means, one column per snapshot
    P0, R0  : nominal signal / noise covariances (SPD)
    nu_x    : signal-covariance dof, > n + 1
    nu_w    : noise-covariance dof, > m + 1
    N       : number of snapshots
    """

    H: np.ndarray
    U: np.ndarray
    P0: np.ndarray
    R0: np.ndarray
    nu_x: float
    nu_w: float
    N: int

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        U = np.asarray(self.U, dtype=float)
        if H.ndim != 2:
            raise InvalidDimension(f"H must be 2-D, got shape {H.shape}")
        m, n = H.shape
        if m < n:
            raise InvalidDimension(f"H must be tall or square, got {H.shape}")
        sv = np.linalg.svd(H, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise InvalidDimension("H is rank deficient")
        if U.shape != (n, self.N):
            raise InvalidDimension(f"U must be {n}x{self.N}, got {U.shape}")
        if self.N < 1:
            raise InvalidDimension("N must be positive")
        require_spd(self.P0, "P0", dim=n)
        require_spd(self.R0, "R0", dim=m)
        if not self.nu_x > n + 1:
            raise ValueError(f"nu_x must exceed n + 1 = {n + 1}, got {self.nu_x}")
        if not self.nu_w > m + 1:
            raise ValueError(f"nu_w must exceed m + 1 = {m + 1}, got {self.nu_w}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "P0", np.asarray(self.P0, dtype=float))
        object.__setattr__(self, "R0", np.asarray(self.R0, dtype=float))

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def C_x(self) -> np.ndarray:
        return (self.nu_x - self.n - 1) * self.P0

    @property
    def C_w(self) -> np.ndarray:
        return (self.nu_w - self.m - 1) * self.R0

    def weights(self, mode: str = "cmap") -> tuple[float, float]:
        """(gamma_x, gamma_w) for the joint or the marginalized objective."""
        if mode == "cmap":
            return self.nu_x + self.n + 1 + self.N, self.nu_w + self.m + 1 + self.N
        if mode == "mmap":
            return self.nu_x + self.N, self.nu_w + self.N
        raise ValueError(f"weight mode must be one of {WEIGHT_MODES}, got {mode!r}")

    def prior_x(self) -> InverseWishartParams:
        return InverseWishartParams(self.C_x, self.nu_x)

    def prior_w(self) -> InverseWishartParams:
        return InverseWishartParams(self.C_w, self.nu_w)


@dataclass(frozen=True)
class GroundTruth:
    """One realization of the generative model."""

    X: np.ndarray
    P: np.ndarray
    R: np.ndarray
    W: np.ndarray


def training_sequence(K: int, antenna_dim: int) -> np.ndarray:
    """Deterministic white d x K training sequence with squared norm 10.

    Rows are the first d vectors of the orthonormal DCT-II basis on K
    points, scaled so S S^T = (10/d) I_d and ||S||_F^2 = 10.
    """
    if K < antenna_dim:
        raise InvalidDimension(f"need K >= antenna_dim, got K={K}, d={antenna_dim}")
    k = np.arange(K)
    rows = np.empty((antenna_dim, K))
    for j in range(antenna_dim):
        w = np.sqrt(1.0 / K) if j == 0 else np.sqrt(2.0 / K)
        rows[j] = w * np.cos(np.pi * (2 * k + 1) * j / (2.0 * K))
    return np.sqrt(10.0 / antenna_dim) * rows


def build_mimo_spec(
    K: int,
    snr_linear: float,
    nu_x: float,
    nu_w: float,
    N: int,
    antenna_dim: int = 2,
) -> ProblemSpec:
    """Channel-estimation setup: H = S^T kron I_d, isotropic nominals.

    The noise level is calibrated so tr{H P0 H^T} / tr{R0} equals
    ``snr_linear`` exactly.
    """
    if snr_linear <= 0:
        raise ValueError("snr_linear must be positive")
    d = antenna_dim
    S = training_sequence(K, d)
    H = np.kron(S.T, np.eye(d))
    m, n = d * K, d * d
    P0 = np.eye(n) / n
    sigma_w2 = np.trace(H @ H.T) / (m * n * snr_linear)
    R0 = sigma_w2 * np.eye(m)
    return ProblemSpec(
        H=H, U=np.zeros((n, N)), P0=P0, R0=R0, nu_x=float(nu_x), nu_w=float(nu_w), N=N
    )


def snr_of(spec: ProblemSpec) -> float:
    """tr{H P0 H^T} / tr{R0}."""
    return float(np.trace(spec.H @ spec.P0 @ spec.H.T) / np.trace(spec.R0))


def expected_signal_energy(spec: ProblemSpec) -> float:
    """E||X||_F^2 = N tr{P0} + ||U||_F^2 (the NSE denominator)."""
    return float(spec.N * np.trace(spec.P0) + np.sum(spec.U**2))


def draw_scenario(spec: ProblemSpec, rng) -> tuple[GroundTruth, np.ndarray]:
    """Draw (P, R) from their priors, then X and W, and form Y = H X + W."""
    gen = as_generator(rng)
    P = sample_inverse_wishart(spec.prior_x(), gen)
    R = sample_inverse_wishart(spec.prior_w(), gen)
    X = spec.U + spd_cholesky(P, "P") @ gen.standard_normal((spec.n, spec.N))
    W = spd_cholesky(R, "R") @ gen.standard_normal((spec.m, spec.N))
    return GroundTruth(X=X, P=P, R=R, W=W), spec.H @ X + W


def spec_to_dict(spec: ProblemSpec) -> dict:
    return {
        "schema_version": SPEC_SCHEMA_VERSION,
        "H": spec.H.tolist(),
        "U": spec.U.tolist(),
        "P0": spec.P0.tolist(),
        "R0": spec.R0.tolist(),
        "nu_x": spec.nu_x,
        "nu_w": spec.nu_w,
        "N": spec.N,
    }


def spec_from_dict(doc: dict) -> ProblemSpec:
    version = doc.get("schema_version")
    if version != SPEC_SCHEMA_VERSION:
        raise SchemaMismatch(f"unsupported spec schema_version: {version!r}")
    missing = [k for k in ("H", "U", "P0", "R0", "nu_x", "nu_w", "N") if k not in doc]
    if missing:
        raise InvalidDimension(f"spec document missing fields: {', '.join(missing)}")
    return ProblemSpec(
        H=np.asarray(doc["H"], dtype=float),
        U=np.asarray(doc["U"], dtype=float),
        P0=np.asarray(doc["P0"], dtype=float),
        R0=np.asarray(doc["R0"], dtype=float),
        nu_x=float(doc["nu_x"]),
        nu_w=float(doc["nu_w"]),
        N=int(doc["N"]),
    )


def save_spec(spec: ProblemSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)


def load_spec(path) -> ProblemSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
