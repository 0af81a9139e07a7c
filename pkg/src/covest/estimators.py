"""Point estimators for the linear model with uncertain covariances.

The joint signal/covariance MAP ("cmap") concentrates the covariances out
of the posterior, leaving a sum of two log-det terms V(X).  Its stationary
points are found by re-applying the standard MAP formula with covariances
re-estimated from the current iterate, started from both the MVU estimate
and the prior mean.  The marginalized variant ("mmap") is the same machinery
with weights nu + N instead of nu + p + 1 + N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import Diverged, NotPositiveDefinite, SingularNormalEquations, ZeroMeanRequired
from .linalg import chol_logdet, chol_solve, spd_cholesky, sym
from .model import ProblemSpec

MVU_START = "mvu"
PRIOR_START = "prior"
TIE_BROKEN = "tie"
RANDOM_START = "random"

START_MEANS = ("mvu", "prior", "map", "dre")

# Two converged points count as distinct minima when their Frobenius
# distance exceeds this factor times n*N.
DISTINCT_MINIMA_RTOL = 1e-2
# Costs within 1e-9 * (1 + |V1|) are treated as tied.
COST_TIE_RTOL = 1e-9


@dataclass
class SolverOptions:
    """Iteration controls shared by the fixed-point and descent solvers."""

    epsilon: float = 1e-6
    max_iters: int = 1000
    weight_mode: str = "cmap"
    step_size: float = 1e-4
    backtracking: bool = True
    random_starts: int = 0
    start_mean: str = "mvu"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.weight_mode not in ("cmap", "mmap"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")
        if self.start_mean not in START_MEANS:
            raise ValueError(f"start_mean must be one of {START_MEANS}")


@dataclass
class EstimateResult:
    X_hat: np.ndarray
    P_hat: np.ndarray
    R_hat: np.ndarray
    iterations: int
    final_cost: float
    start_used: str
    converged: bool
    two_minima: bool = False


@dataclass(frozen=True)
class DreBounds:
    """Eigenvalue intervals for the difference-regret estimator.

    Entries follow the descending eigenvalue order of P0 and R0; the first
    n noise entries pair with the descending singular values of H.
    """

    lower_x: np.ndarray
    upper_x: np.ndarray
    lower_w: np.ndarray
    upper_w: np.ndarray

    def __post_init__(self):
        for lo, hi, tag in (
            (self.lower_x, self.upper_x, "x"),
            (self.lower_w, self.upper_w, "w"),
        ):
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if np.any(lo < 0) or np.any(lo > hi):
                raise ValueError(f"need 0 <= lower_{tag} <= upper_{tag} elementwise")
            object.__setattr__(self, f"lower_{tag}", lo)
            object.__setattr__(self, f"upper_{tag}", hi)


def _lower_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = solve_triangular(lower, b, lower=True, check_finite=False)
    return solve_triangular(lower, y, lower=True, trans="T", check_finite=False)


def _chol(a: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{what} is not positive definite") from exc


def _map_point(
    H: np.ndarray, Y: np.ndarray, U: np.ndarray, P: np.ndarray, R: np.ndarray
) -> np.ndarray:
    """(H^T R^-1 H + P^-1)^-1 (H^T R^-1 Y + P^-1 U) via stacked solves."""
    n = H.shape[1]
    cR = _chol(R, "R")
    s = _lower_solve(cR, np.concatenate([H, Y], axis=1))
    RiH, RiY = s[:, :n], s[:, n:]
    cP = _chol(P, "P")
    s2 = _lower_solve(cP, np.concatenate([np.eye(n), U], axis=1))
    Pi, PiU = s2[:, :n], s2[:, n:]
    G = sym(H.T @ RiH + Pi)
    return _lower_solve(_chol(G, "normal matrix"), H.T @ RiY + PiU)


def estimate_mvu(spec: ProblemSpec, Y: np.ndarray) -> np.ndarray:
    """Generalized least squares with the nominal noise covariance."""
    cR = spd_cholesky(spec.R0, "R0")
    RiH = chol_solve(cR, spec.H)
    RiY = chol_solve(cR, Y)
    G = sym(spec.H.T @ RiH)
    try:
        cG = spd_cholesky(G, "H^T R0^-1 H")
    except NotPositiveDefinite as exc:
        raise SingularNormalEquations(str(exc)) from exc
    return chol_solve(cG, spec.H.T @ RiY)


def estimate_map(
    spec: ProblemSpec, Y: np.ndarray, P: np.ndarray, R: np.ndarray
) -> np.ndarray:
    """Linear MMSE / MAP estimate for known covariances P and R."""
    spd_cholesky(np.asarray(P, dtype=float), "P")
    spd_cholesky(np.asarray(R, dtype=float), "R")
    return _map_point(spec.H, Y, spec.U, np.asarray(P, float), np.asarray(R, float))


def covariance_updates(
    spec: ProblemSpec, Y: np.ndarray, X: np.ndarray, weight_mode: str = "cmap"
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form maximizing covariances at a fixed signal matrix X."""
    gx, gw = spec.weights(weight_mode)
    Xt = X - spec.U
    Yt = Y - spec.H @ X
    P = sym(spec.C_x + Xt @ Xt.T) / gx
    R = sym(spec.C_w + Yt @ Yt.T) / gw
    return P, R


def cost_V(spec: ProblemSpec, Y: np.ndarray, X: np.ndarray, weight_mode: str = "cmap") -> float:
    """Concentrated negative log-posterior (up to constants).

    V(X) = gamma_w/2 ln|I + Yt^T C_w^-1 Yt| + gamma_x/2 ln|I + Xt^T C_x^-1 Xt|
    with Yt = Y - H X and Xt = X - U.
    """
    gx, gw = spec.weights(weight_mode)
    N = spec.N
    Yt = Y - spec.H @ X
    Xt = X - spec.U
    cw = _chol(spec.C_w, "C_w")
    cx = _chol(spec.C_x, "C_x")
    tw = solve_triangular(cw, Yt, lower=True, check_finite=False)
    tx = solve_triangular(cx, Xt, lower=True, check_finite=False)
    A = sym(np.eye(N) + tw.T @ tw)
    B = sym(np.eye(N) + tx.T @ tx)
    return 0.5 * gw * chol_logdet(_chol(A, "A")) + 0.5 * gx * chol_logdet(_chol(B, "B"))


def grad_V(
    spec: ProblemSpec,
    Y: np.ndarray,
    X: np.ndarray,
    weight_mode: str = "cmap",
    form: str = "auto",
) -> np.ndarray:
    """Gradient of the concentrated cost with respect to X.

    ``form`` selects the N x N Gram-matrix expression ("gram") or the
    matrix-inversion-lemma expression with m x m / n x n inverses
    ("outer"); "auto" picks the cheaper one per term.  Both agree to
    roundoff.
    """
    gx, gw = spec.weights(weight_mode)
    N = spec.N
    Yt = Y - spec.H @ X
    Xt = X - spec.U
    if form not in ("auto", "gram", "outer"):
        raise ValueError(f"unknown gradient form {form!r}")

    use_outer_w = form == "outer" or (form == "auto" and N > spec.m)
    use_outer_x = form == "outer" or (form == "auto" and N > spec.n)

    if use_outer_w:
        d1 = -gw * spec.H.T @ _lower_solve(_chol(sym(spec.C_w + Yt @ Yt.T), "C_w + YY^T"), Yt)
    else:
        CwiY = _lower_solve(_chol(spec.C_w, "C_w"), Yt)
        A = sym(np.eye(N) + Yt.T @ CwiY)
        d1 = -gw * spec.H.T @ _lower_solve(_chol(A, "A"), CwiY.T).T

    if use_outer_x:
        d2 = gx * _lower_solve(_chol(sym(spec.C_x + Xt @ Xt.T), "C_x + XX^T"), Xt)
    else:
        CxiX = _lower_solve(_chol(spec.C_x, "C_x"), Xt)
        B = sym(np.eye(N) + Xt.T @ CxiX)
        d2 = gx * _lower_solve(_chol(B, "B"), CxiX.T).T
    return d1 + d2


def fixed_point_step(
    spec: ProblemSpec, Y: np.ndarray, X_prev: np.ndarray, weight_mode: str = "cmap"
) -> np.ndarray:
    """One pass of the MAP formula with covariances re-estimated at X_prev."""
    P, R = covariance_updates(spec, Y, X_prev, weight_mode)
    return _map_point(spec.H, Y, spec.U, P, R)


def _iterate(spec, Y, X0, weight_mode, epsilon, max_iters):
    """Run the fixed point until the Frobenius step drops below epsilon."""
    gx, gw = spec.weights(weight_mode)
    H, U, Cx, Cw = spec.H, spec.U, spec.C_x, spec.C_w
    X = X0
    for it in range(1, max_iters + 1):
        Xt = X - U
        Yt = Y - H @ X
        P = sym(Cx + Xt @ Xt.T) / gx
        R = sym(Cw + Yt @ Yt.T) / gw
        Xn = _map_point(H, Y, U, P, R)
        delta = float(np.linalg.norm(Xn - X))
        X = Xn
        if delta < epsilon:
            return X, it, True
    return X, max_iters, False


def _finish(spec, Y, X, weight_mode, iterations, start_used, converged, two_minima):
    P_hat, R_hat = covariance_updates(spec, Y, X, weight_mode)
    return EstimateResult(
        X_hat=X,
        P_hat=P_hat,
        R_hat=R_hat,
        iterations=iterations,
        final_cost=cost_V(spec, Y, X, weight_mode),
        start_used=start_used,
        converged=converged,
        two_minima=two_minima,
    )


def estimate_cmap(
    spec: ProblemSpec,
    Y: np.ndarray,
    opts: SolverOptions | None = None,
    rng=None,
) -> EstimateResult:
    """Joint signal/covariance MAP by two-start fixed-point iteration.

    Runs the iteration from the MVU estimate and from the prior mean,
    keeps the converged point with the lower concentrated cost, and
    breaks exact ties toward the nominal-covariance MAP estimate.  With
    ``opts.random_starts`` > 0, the two canonical starts are replaced by
    that many draws around ``opts.start_mean`` (columns perturbed with
    covariance P0), which needs ``rng``.
    """
    opts = opts or SolverOptions()
    mode = opts.weight_mode
    if opts.random_starts > 0:
        return _estimate_random_starts(spec, Y, opts, rng)

    x_mvu = estimate_mvu(spec, Y)
    X1, it1, conv1 = _iterate(spec, Y, x_mvu, mode, opts.epsilon, opts.max_iters)
    X2, it2, conv2 = _iterate(spec, Y, spec.U, mode, opts.epsilon, opts.max_iters)
    V1 = cost_V(spec, Y, X1, mode)
    V2 = cost_V(spec, Y, X2, mode)
    two_minima = float(np.linalg.norm(X1 - X2)) > DISTINCT_MINIMA_RTOL * spec.n * spec.N

    if abs(V1 - V2) <= COST_TIE_RTOL * (1.0 + abs(V1)):
        x_map = estimate_map(spec, Y, spec.P0, spec.R0)
        winner = X1 if np.linalg.norm(X1 - x_map) <= np.linalg.norm(X2 - x_map) else X2
        start = TIE_BROKEN
    elif V1 < V2:
        winner, start = X1, MVU_START
    else:
        winner, start = X2, PRIOR_START
    return _finish(spec, Y, winner, mode, it1 + it2, start, conv1 and conv2, two_minima)


def estimate_mmap(
    spec: ProblemSpec, Y: np.ndarray, opts: SolverOptions | None = None
) -> EstimateResult:
    """Marginalized MAP: identical solver, weights nu + N."""
    opts = opts or SolverOptions()
    mmap_opts = SolverOptions(
        epsilon=opts.epsilon,
        max_iters=opts.max_iters,
        weight_mode="mmap",
        step_size=opts.step_size,
        backtracking=opts.backtracking,
    )
    return estimate_cmap(spec, Y, mmap_opts)


def _estimate_random_starts(spec, Y, opts, rng):
    from .distributions import as_generator

    if rng is None:
        raise ValueError("random_starts > 0 requires an rng")
    gen = as_generator(rng)
    mode = opts.weight_mode
    if opts.start_mean == "mvu":
        mean = estimate_mvu(spec, Y)
    elif opts.start_mean == "prior":
        mean = spec.U
    elif opts.start_mean == "map":
        mean = estimate_map(spec, Y, spec.P0, spec.R0)
    else:
        mean = estimate_dre(spec, Y)
    lp = spd_cholesky(spec.P0, "P0")
    best = None
    total_iters = 0
    all_converged = True
    for _ in range(opts.random_starts):
        X0 = mean + lp @ gen.standard_normal((spec.n, spec.N))
        X, it, conv = _iterate(spec, Y, X0, mode, opts.epsilon, opts.max_iters)
        total_iters += it
        all_converged = all_converged and conv
        V = cost_V(spec, Y, X, mode)
        if best is None or V < best[1]:
            best = (X, V)
    return _finish(spec, Y, best[0], mode, total_iters, RANDOM_START, all_converged, False)


def estimate_cmap_gd(
    spec: ProblemSpec, Y: np.ndarray, opts: SolverOptions | None = None
) -> EstimateResult:
    """Gradient descent on the concentrated cost from the MVU start.

    With backtracking enabled (default) a step is halved up to 20 times
    until the cost decreases, so the cost is non-increasing.  With a fixed
    step size, ten consecutive cost increases raise :class:`Diverged`.
    """
    opts = opts or SolverOptions()
    mode = opts.weight_mode
    X = estimate_mvu(spec, Y)
    g = grad_V(spec, Y, X, mode)
    iterations = 0
    converged = bool(np.linalg.norm(g) < opts.epsilon)
    cost = cost_V(spec, Y, X, mode)
    increases = 0
    while not converged and iterations < opts.max_iters:
        if opts.backtracking:
            step = opts.step_size
            accepted = False
            for _ in range(20):
                Xn = X - step * g
                cn = cost_V(spec, Y, Xn, mode)
                if cn < cost:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break  # numerical floor; gradient test below decides convergence
            X, cost = Xn, cn
        else:
            X = X - opts.step_size * g
            cn = cost_V(spec, Y, X, mode)
            increases = increases + 1 if cn >= cost else 0
            if increases >= 10:
                raise Diverged(
                    f"cost increased for {increases} consecutive steps "
                    f"(step_size={opts.step_size:g})"
                )
            cost = cn
        iterations += 1
        g = grad_V(spec, Y, X, mode)
        converged = bool(np.linalg.norm(g) < opts.epsilon)
    return _finish(spec, Y, X, mode, iterations, MVU_START, converged, False)


def estimate_vmap(
    spec: ProblemSpec, Y: np.ndarray, opts: SolverOptions | None = None
) -> EstimateResult:
    """Mean-field variational MAP with cyclic closed-form updates.

    The posterior is approximated by independent factors over X, P and R;
    P^-1 and R^-1 then have Wishart factors with means gamma'_x Ctx^-1 and
    gamma'_w Ctw^-1, and the X factor is Gaussian.  Iterates the scale
    matrices from Ctx = C_x, Ctw = C_w until the X-factor mean settles.
    Covariance summaries are the modes of the inverse-Wishart factors.
    """
    opts = opts or SolverOptions()
    gpx, gpw = spec.weights("mmap")
    H, U, N, n, m = spec.H, spec.U, spec.N, spec.n, spec.m
    Ctx = spec.C_x
    Ctw = spec.C_w
    Ut_prev = None
    Ut = spec.U
    Pt = spec.P0
    iterations = 0
    converged = False
    for _ in range(opts.max_iters):
        # E[P^-1] = gpx Ctx^-1, E[R^-1] = gpw Ctw^-1; X-factor mean/covariance
        EPi = gpx * _lower_solve(_chol(Ctx, "Ctx"), np.eye(n))
        ERi = gpw * _lower_solve(_chol(Ctw, "Ctw"), np.eye(m))
        G = sym(H.T @ ERi @ H + EPi)
        cG = _chol(G, "variational normal matrix")
        Pt = sym(_lower_solve(cG, np.eye(n)))
        Ut = _lower_solve(cG, H.T @ (ERi @ Y) + EPi @ U)
        iterations += 1
        if Ut_prev is not None and np.linalg.norm(Ut - Ut_prev) < opts.epsilon:
            converged = True
            break
        Ut_prev = Ut
        # expected outer products refresh the inverse-Wishart scales
        D = Ut - U
        Ctx = sym(spec.C_x + N * Pt + D @ D.T)
        Ew = Y - H @ Ut
        Ctw = sym(spec.C_w + Ew @ Ew.T + N * (H @ Pt @ H.T))
    P_hat = Ctx / (gpx + n + 1)
    R_hat = Ctw / (gpw + m + 1)
    return EstimateResult(
        X_hat=Ut,
        P_hat=P_hat,
        R_hat=R_hat,
        iterations=iterations,
        final_cost=cost_V(spec, Y, Ut, "mmap"),
        start_used=PRIOR_START,
        converged=converged,
        two_minima=False,
    )


def dre_bounds_heuristic(spec: ProblemSpec) -> DreBounds:
    """Eigenvalue bounds (1 -+ nu0/nu) * lambda, clipped at zero below.

    nu0 is the smallest integer dof with a finite prior mean (p + 2), so
    minimal certainty gives [0, 2 lambda] and nu -> inf collapses both
    bounds onto lambda.
    """
    lam_x = np.sort(np.linalg.eigvalsh(spec.P0))[::-1]
    lam_w = np.sort(np.linalg.eigvalsh(spec.R0))[::-1]
    rx = (spec.n + 2) / spec.nu_x
    rw = (spec.m + 2) / spec.nu_w
    return DreBounds(
        lower_x=np.maximum(0.0, (1.0 - rx) * lam_x),
        upper_x=(1.0 + rx) * lam_x,
        lower_w=np.maximum(0.0, (1.0 - rw) * lam_w),
        upper_w=(1.0 + rw) * lam_w,
    )


def estimate_dre(
    spec: ProblemSpec, Y: np.ndarray, bounds: DreBounds | None = None
) -> np.ndarray:
    """Difference-regret linear estimator over eigenvalue bounds.

    Blends each bounded eigenvalue as delta_i = alpha_i l_i + (1-alpha_i) u_i
    with alpha_i = sqrt(l_w_i + u_x_i s_i^2) / (sqrt(l_w_i + u_x_i s_i^2)
    + sqrt(u_w_i + l_x_i s_i^2)), s_i the singular values of H; noise
    eigenvalues beyond the first n keep their nominal values.  Requires a
    zero prior mean.
    """
    if np.any(spec.U != 0.0):
        raise ZeroMeanRequired("the difference-regret estimator assumes U = 0")
    if bounds is None:
        bounds = dre_bounds_heuristic(spec)
    n, m = spec.n, spec.m
    lam_x, Vx = np.linalg.eigh(spec.P0)
    lam_w, Vw = np.linalg.eigh(spec.R0)
    ox = np.argsort(lam_x)[::-1]
    ow = np.argsort(lam_w)[::-1]
    lam_w, Vw = lam_w[ow], Vw[:, ow]
    Vx = Vx[:, ox]
    sv = np.linalg.svd(spec.H, compute_uv=False)  # descending, length n
    s2 = sv**2
    num = np.sqrt(bounds.lower_w[:n] + bounds.upper_x * s2)
    den = num + np.sqrt(bounds.upper_w[:n] + bounds.lower_x * s2)
    alpha = num / den
    delta_x = alpha * bounds.lower_x + (1.0 - alpha) * bounds.upper_x
    delta_w = lam_w.copy()
    delta_w[:n] = alpha * bounds.lower_w[:n] + (1.0 - alpha) * bounds.upper_w[:n]
    Dx = sym(Vx @ (delta_x[:, None] * Vx.T))
    Dw = sym(Vw @ (delta_w[:, None] * Vw.T))
    M = sym(spec.H @ Dx @ spec.H.T + Dw)
    return Dx @ spec.H.T @ _lower_solve(_chol(M, "H Dx H^T + Dw"), Y)
