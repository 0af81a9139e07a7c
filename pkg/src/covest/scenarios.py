"""Named benchmark scenarios mirroring the published experiment grid.

Each scenario bundles one or more :class:`ExperimentConfig` sweeps plus a
table of published reference values used by the CLI's report mode.  Desk
defaults keep runtimes tolerable; ``--trials`` scales them up or down.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownScenario
from .estimators import SolverOptions
from .montecarlo import ExperimentConfig, ccdf

NU_INF = 1.0e5  # numerical stand-in for infinite certainty

# minimal integer dof for the default 2x2 channel setup (n=4, m=16)
NU_X_MIN = 6.0
NU_W_MIN = 18.0


@dataclass(frozen=True)
class ReferenceCheck:
    description: str
    expected: float
    tolerance: float
    extract: object  # callable: {label: ExperimentResult} -> float


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    configs: tuple  # of (label, ExperimentConfig)
    references: tuple = ()


def _point(results, label, grid_value):
    res = results[label]
    for p in res.points:
        if np.isclose(p.grid_value, grid_value):
            return p
    raise KeyError(f"grid value {grid_value} not in {label}")


def _nmse(label, grid_value, estimator):
    return lambda results: _point(results, label, grid_value).nmse_db[estimator]


def _nmse_gap(label, grid_value, a, b):
    def get(results):
        p = _point(results, label, grid_value)
        return p.nmse_db[a] - p.nmse_db[b]

    return get


def _mean_iters(label, grid_value, estimator="cmap"):
    return lambda results: _point(results, label, grid_value).mean_iterations[estimator]


def _ccdf_ratio(label, grid_value, a, b, kappa):
    def get(results):
        p = _point(results, label, grid_value)
        ca = ccdf(p.nse_samples[a], [kappa])[0]
        cb = ccdf(p.nse_samples[b], [kappa])[0]
        return float(ca / cb) if cb > 0 else float("inf")

    return get


def _mimo(name, trials, seed, *, sweep="snr_db", grid=(0.0,), estimators,
          snr_db=0.0, nu_x=NU_X_MIN, nu_w=NU_W_MIN, N=4, K=8, d=2,
          solver=None, gibbs=(), gibbs_burn_in=None):
    return ExperimentConfig(
        name=name,
        estimators=tuple(estimators),
        trials=trials,
        base_seed=seed,
        sweep=sweep,
        grid=tuple(grid),
        K=K,
        antenna_dim=d,
        snr_db=snr_db,
        nu_x=nu_x,
        nu_w=nu_w,
        N=N,
        solver=solver or SolverOptions(),
        gibbs_samples=tuple(gibbs),
        gibbs_burn_in=gibbs_burn_in,
    )


SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
SNR_GRID_SHORT = (-10.0, 0.0, 10.0)


def _fig2(trials, seed):
    cfg = _mimo("fig2", trials or 10_000, seed, grid=SNR_GRID, N=1,
                estimators=("mvu", "map", "dre", "cmap"))
    refs = (
        ReferenceCheck("NMSE(map) - NMSE(cmap) at 0 dB [dB]", 2.0, 0.5,
                       _nmse_gap("fig2", 0.0, "map", "cmap")),
    )
    return Scenario("fig2", "NMSE vs SNR, single snapshot, minimal certainties",
                    (("fig2", cfg),), refs)


def _fig3(trials, seed):
    cfg = _mimo("fig3", trials or 10_000, seed, N=1,
                estimators=("mvu", "map", "dre", "cmap"))
    refs = (
        ReferenceCheck("ccdf(cmap)/ccdf(mvu) at kappa=10", 0.1, 0.08,
                       _ccdf_ratio("fig3", 0.0, "cmap", "mvu", 10.0)),
    )
    return Scenario("fig3", "ccdf of NSE at 0 dB, single snapshot",
                    (("fig3", cfg),), refs)


def _fig4(trials, seed):
    cfg = _mimo("fig4", trials or 1_000, seed, grid=SNR_GRID_SHORT,
                estimators=("mvu", "map", "cmap", "gibbs"),
                gibbs=(200, 2000, 20000))
    refs = (
        ReferenceCheck("NMSE(gibbs20000) - NMSE(cmap) at 0 dB [dB] (<= 0)", -0.1, 0.4,
                       _nmse_gap("fig4", 0.0, "gibbs20000", "cmap")),
    )
    return Scenario("fig4", "NMSE vs SNR with posterior-mean chains of increasing length",
                    (("fig4", cfg),), refs)


def _fig5(trials, seed):
    combos = (
        ("nu0_nu0", NU_X_MIN, NU_W_MIN),
        ("nu0_nuinf", NU_X_MIN, NU_INF),
        ("nuinf_nu0", NU_INF, NU_W_MIN),
        ("nuinf_nuinf", NU_INF, NU_INF),
    )
    configs = tuple(
        (label, _mimo(f"fig5_{label}", trials or 2_000, seed, grid=SNR_GRID_SHORT,
                      nu_x=nx, nu_w=nw, estimators=("map", "cmap")))
        for label, nx, nw in combos
    )
    refs = (
        ReferenceCheck("dNMSE(cmap-map), nu minimal, -10 dB [dB] (<= -3)", -3.0, 1.2,
                       _nmse_gap("nu0_nu0", -10.0, "cmap", "map")),
        ReferenceCheck("|dNMSE| at nu=inf, 0 dB [dB]", 0.0, 0.05,
                       _nmse_gap("nuinf_nuinf", 0.0, "cmap", "map")),
    )
    return Scenario("fig5", "NMSE difference CMAP-MAP vs SNR at certainty extremes",
                    configs, refs)


def _fig6(trials, seed):
    cfg = _mimo("fig6", trials or 10_000, seed,
                estimators=("mvu", "map", "dre", "cmap"))
    return Scenario("fig6", "ccdf of NSE at 0 dB, minimal certainties, N=4",
                    (("fig6", cfg),))


def _fig7a(trials, seed):
    cfg = _mimo("fig7a", trials or 10_000, seed, nu_w=NU_INF,
                estimators=("mvu", "map", "cmap"))
    return Scenario("fig7a", "ccdf at 0 dB, uncertain signal / certain noise covariance",
                    (("fig7a", cfg),))


def _fig7b(trials, seed):
    cfg = _mimo("fig7b", trials or 10_000, seed, nu_x=NU_INF,
                estimators=("mvu", "map", "cmap"))
    return Scenario("fig7b", "ccdf at 0 dB, certain signal / uncertain noise covariance",
                    (("fig7b", cfg),))


def _fig7(trials, seed):
    return Scenario(
        "fig7", "both mixed-certainty ccdfs",
        _fig7a(trials, seed).configs + _fig7b(trials, seed).configs,
    )


def _fig8(trials, seed):
    configs = tuple(
        (f"snr{int(s)}", _mimo(f"fig8_snr{int(s)}", trials or 2_000, seed,
                               sweep="N", grid=(1, 2, 4, 8, 16), snr_db=s,
                               estimators=("map", "cmap")))
        for s in SNR_GRID_SHORT
    )
    refs = (
        ReferenceCheck("cov gain P (cmap vs nominal) at 0 dB, N=4 [dB] (< 0)", -1.0, 1.0,
                       lambda r: _point(r, "snr0", 4.0).cov_gain_db["P"]),
        ReferenceCheck("cov gain R (cmap vs nominal) at 0 dB, N=4 [dB] (< 0)", -1.0, 1.0,
                       lambda r: _point(r, "snr0", 4.0).cov_gain_db["R"]),
    )
    return Scenario("fig8", "covariance-estimate gain over nominals vs snapshot count",
                    configs, refs)


def _fig9a(trials, seed):
    cfg = _mimo("fig9a", trials or 2_000, seed, sweep="delta_nu_x",
                grid=(0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
                estimators=("mvu", "map", "cmap"))
    return Scenario("fig9a", "NMSE vs signal-dof mismatch at 0 dB",
                    (("fig9a", cfg),))


def _fig9b(trials, seed):
    cfg = _mimo("fig9b", trials or 2_000, seed, sweep="delta_nu_w",
                grid=(0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
                estimators=("mvu", "map", "cmap"))
    return Scenario("fig9b", "NMSE vs noise-dof mismatch at 0 dB",
                    (("fig9b", cfg),))


def _fig11(trials, seed):
    cfg = _mimo("fig11", trials or 10_000, seed, sweep="epsilon",
                grid=(1e-1, 1e-3, 1e-6), estimators=("cmap",))
    refs = (
        ReferenceCheck("mean N_iter at eps=1e-1", 2.5, 1.0, _mean_iters("fig11", 1e-1)),
        ReferenceCheck("mean N_iter at eps=1e-3", 10.3, 2.1, _mean_iters("fig11", 1e-3)),
        ReferenceCheck("mean N_iter at eps=1e-6", 24.7, 4.94, _mean_iters("fig11", 1e-6)),
        ReferenceCheck("NMSE(cmap) at eps=1e-1 [dB]", -9.55, 0.3, _nmse("fig11", 1e-1, "cmap")),
        ReferenceCheck("NMSE(cmap) at eps=1e-3 [dB]", -9.78, 0.3, _nmse("fig11", 1e-3, "cmap")),
        ReferenceCheck("NMSE(cmap) at eps=1e-6 [dB]", -9.78, 0.3, _nmse("fig11", 1e-6, "cmap")),
    )
    return Scenario("fig11", "iteration-count ccdf and NMSE vs stopping tolerance",
                    (("fig11", cfg),), refs)


def _fig12(trials, seed):
    cfg = _mimo("fig12", trials or 1_000, seed, grid=SNR_GRID_SHORT,
                K=16, d=4, N=16, nu_x=18.0, nu_w=66.0,
                estimators=("mvu", "map", "cmap"))
    refs = (
        ReferenceCheck("NMSE(map)-NMSE(cmap) at 0 dB, m=64 [dB] (> m=16 gap)", 4.0, 2.0,
                       _nmse_gap("fig12", 0.0, "map", "cmap")),
    )
    return Scenario("fig12", "scale-up: m=64, n=16, N=16",
                    (("fig12", cfg),), refs)


def _fig13(trials, seed):
    cfg = _mimo("fig13", trials or 2_000, seed,
                estimators=("map", "cmap", "mmap", "vmap", "rmap"))
    refs = (
        ReferenceCheck("NMSE(map) [dB]", -6.83, 0.3, _nmse("fig13", 0.0, "map")),
        ReferenceCheck("NMSE(vmap) [dB]", -8.10, 0.3, _nmse("fig13", 0.0, "vmap")),
        ReferenceCheck("NMSE(cmap) [dB]", -9.94, 0.3, _nmse("fig13", 0.0, "cmap")),
        ReferenceCheck("NMSE(mmap) [dB]", -9.98, 0.3, _nmse("fig13", 0.0, "mmap")),
        ReferenceCheck("NMSE(rmap) [dB]", -9.93, 0.3, _nmse("fig13", 0.0, "rmap")),
    )
    return Scenario("fig13", "alternative estimators at 0 dB: map/cmap/mmap/vmap/rmap",
                    (("fig13", cfg),), refs)


_BUILDERS = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig7a": _fig7a,
    "fig7b": _fig7b,
    "fig8": _fig8,
    "fig9a": _fig9a,
    "fig9b": _fig9b,
    "fig11": _fig11,
    "fig12": _fig12,
    "fig13": _fig13,
}


def scenario_names():
    return tuple(sorted(_BUILDERS))


def build_scenario(name: str, trials: int | None = None, seed: int = 20260808) -> Scenario:
    """Materialize a named scenario; trials=None keeps desk defaults."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; choose from {', '.join(scenario_names())}"
        ) from None
    return builder(trials, seed)
