"""Deterministic, parallelizable Monte Carlo benchmark engine.

Each trial draws its scenario from a stream keyed by (base_seed, trial_id)
only, so results are bitwise identical for any worker count; aggregation is
a fold in trial order.  Normalized squared errors use the analytic energy
E||X||_F^2 = N tr P0 + ||U||_F^2 as denominator.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .distributions import RngStream
from .errors import EmptySample, SchemaMismatch
from .estimators import (
    SolverOptions,
    estimate_cmap,
    estimate_dre,
    estimate_map,
    estimate_mmap,
    estimate_mvu,
    estimate_vmap,
)
from .gibbs import GibbsConfig, gibbs_posterior_mean
from .model import build_mimo_spec, expected_signal_energy, draw_scenario

RESULT_SCHEMA_VERSION = 1

SWEEP_AXES = ("snr_db", "N", "delta_nu_x", "delta_nu_w", "epsilon")

ESTIMATOR_NAMES = ("mvu", "map", "cmap", "mmap", "vmap", "dre", "null", "rmap", "gibbs")

# Stream lanes: 0 scenario, 1 rmap restarts, 10+i the i-th Gibbs chain length.
LANE_SCENARIO = 0
LANE_RMAP = 1
LANE_GIBBS = 10

DEFAULT_KAPPAS = tuple(np.logspace(-2.0, 2.0, 50))


@dataclass
class TrialRecord:
    trial_id: int
    nse: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    nonconverged: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    cmap_two_minima: bool | None = None
    cmap_start_won: str | None = None
    cov_se: dict = field(default_factory=dict)
    cov_norm: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a channel-setup template plus a grid on a single axis."""

    name: str
    estimators: tuple
    trials: int
    base_seed: int
    sweep: str = "snr_db"
    grid: tuple = (0.0,)
    K: int = 8
    antenna_dim: int = 2
    snr_db: float = 0.0
    nu_x: float = 6.0
    nu_w: float = 18.0
    N: int = 4
    solver: SolverOptions = field(default_factory=SolverOptions)
    gibbs_samples: tuple = ()
    gibbs_burn_in: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if len(self.grid) == 0:
            raise ValueError("grid must be nonempty")
        if self.sweep not in SWEEP_AXES:
            raise ValueError(f"sweep must be one of {SWEEP_AXES}")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown:
            raise ValueError(f"unknown estimators: {unknown}")

    def resolve(self, grid_value):
        """(draw_spec, est_spec, solver) at one grid point.

        The delta_nu axes model prior mismatch: scenarios are drawn at
        nu + delta while the estimators keep the assumed nu.
        """
        snr_db, nu_x, nu_w, N = self.snr_db, self.nu_x, self.nu_w, self.N
        solver = self.solver
        if self.sweep == "snr_db":
            snr_db = grid_value
        elif self.sweep == "N":
            N = int(grid_value)
        elif self.sweep == "epsilon":
            solver = replace(solver, epsilon=float(grid_value))
        est_spec = build_mimo_spec(
            self.K, 10.0 ** (snr_db / 10.0), nu_x, nu_w, N, self.antenna_dim
        )
        if self.sweep == "delta_nu_x":
            draw_spec = build_mimo_spec(
                self.K, 10.0 ** (snr_db / 10.0), nu_x + grid_value, nu_w, N, self.antenna_dim
            )
        elif self.sweep == "delta_nu_w":
            draw_spec = build_mimo_spec(
                self.K, 10.0 ** (snr_db / 10.0), nu_x, nu_w + grid_value, N, self.antenna_dim
            )
        else:
            draw_spec = est_spec
        return draw_spec, est_spec, solver


def run_trial(
    draw_spec,
    est_spec,
    estimators,
    solver: SolverOptions,
    trial_id: int,
    base_seed: int,
    gibbs_samples=(),
    gibbs_burn_in=None,
) -> TrialRecord:
    """Draw one scenario and apply every requested estimator to it.

    Individual estimator failures are recorded without aborting the trial.
    """
    stream = RngStream(base_seed, trial_id)
    truth, Y = draw_scenario(draw_spec, stream.generator(LANE_SCENARIO))
    energy = expected_signal_energy(draw_spec)
    rec = TrialRecord(trial_id=trial_id)

    def nse_of(x_hat):
        return float(np.sum((truth.X - x_hat) ** 2) / energy)

    for name in estimators:
        try:
            if name == "mvu":
                rec.nse[name] = nse_of(estimate_mvu(est_spec, Y))
            elif name == "map":
                rec.nse[name] = nse_of(estimate_map(est_spec, Y, est_spec.P0, est_spec.R0))
            elif name == "dre":
                rec.nse[name] = nse_of(estimate_dre(est_spec, Y))
            elif name == "null":
                rec.nse[name] = float(np.sum(truth.X**2) / energy)
            elif name == "cmap":
                res = estimate_cmap(est_spec, Y, solver)
                rec.nse[name] = nse_of(res.X_hat)
                rec.iterations[name] = res.iterations
                rec.nonconverged[name] = 0 if res.converged else 1
                rec.cmap_two_minima = res.two_minima
                rec.cmap_start_won = res.start_used
                rec.cov_se["P"] = float(np.sum((truth.P - res.P_hat) ** 2))
                rec.cov_se["P0"] = float(np.sum((truth.P - est_spec.P0) ** 2))
                rec.cov_se["R"] = float(np.sum((truth.R - res.R_hat) ** 2))
                rec.cov_se["R0"] = float(np.sum((truth.R - est_spec.R0) ** 2))
                rec.cov_norm["P"] = float(np.sum(truth.P**2))
                rec.cov_norm["R"] = float(np.sum(truth.R**2))
            elif name == "mmap":
                res = estimate_mmap(est_spec, Y, solver)
                rec.nse[name] = nse_of(res.X_hat)
                rec.iterations[name] = res.iterations
                rec.nonconverged[name] = 0 if res.converged else 1
            elif name == "vmap":
                res = estimate_vmap(est_spec, Y, solver)
                rec.nse[name] = nse_of(res.X_hat)
                rec.iterations[name] = res.iterations
                rec.nonconverged[name] = 0 if res.converged else 1
            elif name == "rmap":
                ropts = replace(solver, random_starts=10, start_mean="dre")
                res = estimate_cmap(est_spec, Y, ropts, rng=stream.generator(LANE_RMAP))
                rec.nse[name] = nse_of(res.X_hat)
                rec.iterations[name] = res.iterations
                rec.nonconverged[name] = 0 if res.converged else 1
            elif name == "gibbs":
                for i, n_samp in enumerate(gibbs_samples):
                    cfg = GibbsConfig(
                        int(n_samp), burn_in=gibbs_burn_in,
                        rng=stream.generator(LANE_GIBBS + i),
                    )
                    rec.nse[f"gibbs{n_samp}"] = nse_of(gibbs_posterior_mean(est_spec, Y, cfg))
        except Exception as exc:  # noqa: BLE001 - per-estimator isolation
            rec.failures[name] = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class GridPointResult:
    grid_value: float
    nmse_db: dict
    nse_samples: dict
    mean_iterations: dict
    iteration_samples: dict
    pr_two_minima: float | None
    pr_mvu_won_given_two: float | None
    cov_gain_db: dict
    failures: dict
    nonconverged: dict


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: list


def _estimator_columns(cfg: ExperimentConfig):
    cols = []
    for name in cfg.estimators:
        if name == "gibbs":
            cols.extend(f"gibbs{n}" for n in cfg.gibbs_samples)
        else:
            cols.append(name)
    return cols


def _aggregate_point(cfg, grid_value, records) -> GridPointResult:
    cols = _estimator_columns(cfg)
    nse_samples = {
        c: np.array([r.nse[c] for r in records if c in r.nse]) for c in cols
    }
    nmse_db = {
        c: 10.0 * np.log10(np.mean(s)) if len(s) else float("nan")
        for c, s in nse_samples.items()
    }
    iter_samples = {}
    mean_iters = {}
    for c in ("cmap", "mmap", "vmap", "rmap"):
        vals = np.array([r.iterations[c] for r in records if c in r.iterations])
        if len(vals):
            iter_samples[c] = vals
            mean_iters[c] = float(np.mean(vals))
    two = np.array([r.cmap_two_minima for r in records if r.cmap_two_minima is not None])
    pr_two = float(np.mean(two)) if len(two) else None
    pr_win = None
    if len(two) and two.any():
        wins = np.array(
            [r.cmap_start_won == "mvu" for r in records if r.cmap_two_minima]
        )
        pr_win = float(np.mean(wins))
    cov_gain = {}
    if any(r.cov_se for r in records):
        for key in ("P", "R"):
            se = sum(r.cov_se[key] for r in records if r.cov_se)
            se0 = sum(r.cov_se[f"{key}0"] for r in records if r.cov_se)
            cov_gain[key] = float(10.0 * np.log10(se / se0))
    failures = {}
    noncon = {}
    for r in records:
        for k in r.failures:
            failures[k] = failures.get(k, 0) + 1
        for k, v in r.nonconverged.items():
            noncon[k] = noncon.get(k, 0) + v
    return GridPointResult(
        grid_value=float(grid_value),
        nmse_db=nmse_db,
        nse_samples=nse_samples,
        mean_iterations=mean_iters,
        iteration_samples=iter_samples,
        pr_two_minima=pr_two,
        pr_mvu_won_given_two=pr_win,
        cov_gain_db=cov_gain,
        failures=failures,
        nonconverged=noncon,
    )


def _run_block(args):
    cfg, grid_value, lo, hi = args
    draw_spec, est_spec, solver = cfg.resolve(grid_value)
    return [
        run_trial(
            draw_spec, est_spec, cfg.estimators, solver, t, cfg.base_seed,
            cfg.gibbs_samples, cfg.gibbs_burn_in,
        )
        for t in range(lo, hi)
    ]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run the full grid; output is identical for any worker count."""
    points = []
    if workers > 1 and "gibbs" in cfg.estimators:
        _warm_gibbs_kernel()
    for g in cfg.grid:
        if workers <= 1 or cfg.trials < 2 * workers:
            records = _run_block((cfg, g, 0, cfg.trials))
        else:
            block = max(1, cfg.trials // (workers * 4))
            tasks = [
                (cfg, g, lo, min(lo + block, cfg.trials))
                for lo in range(0, cfg.trials, block)
            ]
            records = []
            with ProcessPoolExecutor(workers) as pool:
                for chunk in pool.map(_run_block, tasks):
                    records.extend(chunk)
        records.sort(key=lambda r: r.trial_id)
        points.append(_aggregate_point(cfg, g, records))
    return ExperimentResult(config=cfg, points=points)


def _warm_gibbs_kernel():
    spec = build_mimo_spec(2, 1.0, 6.0, 7.0, 1)
    _, Y = draw_scenario(spec, RngStream(0, 0))
    gibbs_posterior_mean(spec, Y, GibbsConfig(2, burn_in=0, rng=RngStream(0, 0)))


def ccdf(samples, kappas=DEFAULT_KAPPAS) -> np.ndarray:
    """Empirical exceedance Pr{sample > kappa} on the given grid."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySample("ccdf needs at least one sample")
    kappas = np.asarray(kappas, dtype=float)
    return np.array([np.mean(samples > k) for k in kappas])


def iteration_stats(iteration_samples, ks=None):
    """Mean iteration count and its ccdf over integer thresholds."""
    vals = np.asarray(iteration_samples)
    if vals.size == 0:
        raise EmptySample("iteration_stats needs at least one sample")
    if ks is None:
        ks = np.arange(0, int(vals.max()) + 1)
    return float(np.mean(vals)), (np.asarray(ks), ccdf(vals, ks))


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def save_experiment(result: ExperimentResult, outdir, kappas=DEFAULT_KAPPAS) -> None:
    """Write config.json, summary.json plus nmse/ccdf CSV curves."""
    os.makedirs(outdir, exist_ok=True)
    cfg = result.config
    cfg_doc = asdict(cfg)
    cfg_doc["schema_version"] = RESULT_SCHEMA_VERSION
    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump(cfg_doc, fh, indent=2)

    summary = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "name": cfg.name,
        "sweep": cfg.sweep,
        "trials": cfg.trials,
        "base_seed": cfg.base_seed,
        "points": [
            {
                "grid_value": p.grid_value,
                "nmse_db": p.nmse_db,
                "mean_iterations": p.mean_iterations,
                "pr_two_minima": p.pr_two_minima,
                "pr_mvu_won_given_two": p.pr_mvu_won_given_two,
                "cov_gain_db": p.cov_gain_db,
                "failures": p.failures,
                "nonconverged": p.nonconverged,
            }
            for p in result.points
        ],
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)

    with open(os.path.join(outdir, "nmse.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid_value", "estimator", "nmse_db", "trials", "seed"])
        for p in result.points:
            for est, v in p.nmse_db.items():
                writer.writerow([_fmt(p.grid_value), est, _fmt(v), cfg.trials, cfg.base_seed])

    multi = len(result.points) > 1
    with open(os.path.join(outdir, "ccdf.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa", "estimator", "exceedance_prob"])
        for p in result.points:
            for est, samples in p.nse_samples.items():
                if not len(samples):
                    continue
                label = f"{est}@{p.grid_value:g}" if multi else est
                for k, prob in zip(kappas, ccdf(samples, kappas)):
                    writer.writerow([_fmt(k), label, _fmt(prob)])

    if any(p.iteration_samples for p in result.points):
        with open(os.path.join(outdir, "niter_ccdf.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kappa", "estimator", "exceedance_prob"])
            for p in result.points:
                for est, vals in p.iteration_samples.items():
                    label = f"{est}@{p.grid_value:g}" if multi else est
                    ks = np.arange(0, int(vals.max()) + 1)
                    for k, prob in zip(ks, ccdf(vals, ks)):
                        writer.writerow([int(k), label, _fmt(prob)])


@dataclass
class LoadedExperiment:
    config: dict
    summary: dict
    nmse_rows: list
    ccdf_rows: list


def load_experiment(outdir) -> LoadedExperiment:
    """Read back persisted aggregates, checking the schema version."""
    with open(os.path.join(outdir, "config.json")) as fh:
        cfg = json.load(fh)
    with open(os.path.join(outdir, "summary.json")) as fh:
        summary = json.load(fh)
    for doc, tag in ((cfg, "config"), (summary, "summary")):
        if doc.get("schema_version") != RESULT_SCHEMA_VERSION:
            raise SchemaMismatch(
                f"{tag} schema_version {doc.get('schema_version')!r} != {RESULT_SCHEMA_VERSION}"
            )
    with open(os.path.join(outdir, "nmse.csv"), newline="") as fh:
        nmse_rows = list(csv.DictReader(fh))
    ccdf_path = os.path.join(outdir, "ccdf.csv")
    ccdf_rows = []
    if os.path.exists(ccdf_path):
        with open(ccdf_path, newline="") as fh:
            ccdf_rows = list(csv.DictReader(fh))
    return LoadedExperiment(config=cfg, summary=summary, nmse_rows=nmse_rows, ccdf_rows=ccdf_rows)
