"""Run and sweep orchestration for configured scenarios."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import cavity, detector, flat_decay
from .config import IntegrationConfig, ScenarioConfig
from .core import derived_rates
from .integrator import default_half_bandwidth, discretize_flat_continuum
from .writers import csv_text, json_text, table_json, write_text

SWEEP_COLUMNS = ("value", "fitted_rate", "predicted_rate", "rate_ratio", "classification",
                 "t_star", "status")


def _paths(cfg: ScenarioConfig, out_dir: str | None):
    path = cfg.output.path
    if out_dir:
        path = os.path.join(out_dir, path)
    stem, _ = os.path.splitext(path)
    ext = "." + cfg.output.format
    return stem, ext


def _emit(cfg, path, columns, rows) -> str:
    text = cfg.to_text()
    if path.endswith(".json"):
        return write_text(path, json_text(table_json(columns, rows), cfg.params, text))
    return write_text(path, csv_text(columns, rows, text))


def _control(cfg: ScenarioConfig, default=None):
    it = cfg.integration
    if replace(it, t_end=None, n_outputs=IntegrationConfig.n_outputs) == IntegrationConfig():
        return default
    return it.control()


def _gamma_d(cfg: ScenarioConfig) -> float:
    if cfg.gamma_d is not None:
        return cfg.gamma_d
    return derived_rates(cfg.params)[2]


# -- scenarios ---------------------------------------------------------------

def run_detector(cfg, stem, ext):
    D = derived_rates(cfg.params)[0]
    dists = detector.count_trajectory(D, cfg.integration.times(), cfg.option("n_max"),
                                      ctl=_control(cfg))
    n_max = dists[0].n_max
    columns = ["t"] + [f"P_{n}" for n in range(n_max + 1)]
    rows = [[d.t, *d.probabilities] for d in dists]
    return [_emit(cfg, stem + ext, columns, rows)], None


def flat_grid(cfg: ScenarioConfig, gamma_d: float):
    p = cfg.params
    half = cfg.grid.half_bandwidth or default_half_bandwidth(p.gamma0, p.gamma0 + gamma_d)
    return discretize_flat_continuum(p.gamma0, p.e0, half, cfg.grid.n_levels, cfg.grid.taper)


def run_flat_decay(cfg, stem, ext):
    p = cfg.params
    D, Dprime, _ = derived_rates(p)
    gamma_d = _gamma_d(cfg)
    grid = flat_grid(cfg, gamma_d)
    times = cfg.integration.times()
    ctl = _control(cfg)
    exact = flat_decay.survival_analytic(p.gamma0, times)
    columns = ["t", "sigma_00", "exact", "trace"]
    if cfg.option("resolved", False):
        traj = flat_decay.evolve_n_resolved(p, grid, times, cfg.option("n_max"), ctl=ctl)
        obs = traj.observables
        current = obs["mean_current"]
        extra = [obs["mean_count"]]
        columns.append("mean_count")
    else:
        traj = flat_decay.evolve_bloch(p, grid, gamma_d, times, ctl)
        obs = traj.observables
        populations = obs["trace"] - obs["survival"]
        current = Dprime * obs["survival"] + D * populations
        extra = []
    cols = [times, obs["survival"], exact, obs["trace"], *extra]
    if D > 0:
        columns.append("current_over_D")
        cols.append(current / D)
    written = [_emit(cfg, stem + ext, columns, np.column_stack(cols))]

    t_ss = flat_decay.steady_time(p.gamma0)
    steady = flat_decay.evolve_bloch(p, grid, gamma_d, [0.0, t_ss], ctl)
    line = flat_decay.line_shape_from_state(steady.state(1), grid)
    ref = flat_decay.lorentzian(grid.energies, p.e0, p.gamma0 + gamma_d)
    written.append(_emit(cfg, stem + "_line" + ext, ["energy", "density", "lorentzian"],
                         np.column_stack([line.energies, line.density, ref])))

    t_fit = np.linspace(0.0, 5.0 / p.gamma0, 101)
    fit_traj = flat_decay.evolve_bloch(p, grid, gamma_d, t_fit, ctl)
    fit = flat_decay.fitted_survival_rate(t_fit, fit_traj.observables["survival"], p.gamma0)
    summary = [fit.rate, p.gamma0, fit.rate / p.gamma0, "n/a", math.nan]
    return written, summary


def run_cavity(cfg, stem, ext):
    p = cfg.params
    gamma_d = _gamma_d(cfg)
    ctl = _control(cfg)
    t_zoom = cfg.option("t_zoom") or 1.0 / max(p.omega_alpha, 1e-12)
    written = []
    for suffix, t_end in (("", cfg.integration.t_end), ("_zoom", t_zoom)):
        times = np.linspace(0.0, t_end, cfg.integration.n_outputs)
        bare = cavity.evolve_cavity(p, None, 0.0, times, ctl).observables["survival"]
        meas = cavity.evolve_cavity(p, None, gamma_d, times, ctl).observables["survival"]
        columns = ["t", "sigma_00_unmeasured", "sigma_00_measured"]
        written.append(_emit(cfg, stem + suffix + ext, columns,
                             np.column_stack([times, bare, meas])))
    report = cavity.classify_regime(p, gamma_d)
    written.append(write_text(stem + "_regime.json",
                              json_text({"regime": report.to_dict()}, p, cfg.to_text())))
    summary = [report.fitted_rate, report.predicted_rate, report.rate_ratio,
               report.classification, report.t_star]
    return written, summary


def run_bayes(cfg, stem, ext):
    D = derived_rates(cfg.params)[0]
    t = cfg.integration.t_end
    obs = detector.ObservationRecord(cfg.option("t1"), cfg.option("n1"))
    cond = detector.bayes_update(D, obs, t, cfg.option("n_max"), ctl=_control(cfg))
    free = detector.evolve_counts(D, t, ctl=_control(cfg))
    size = max(cond.n_max, free.n_max) + 1
    n = np.arange(size)
    pc = np.zeros(size)
    pc[: cond.n_max + 1] = cond.probabilities
    pf = np.zeros(size)
    pf[: free.n_max + 1] = free.probabilities
    shifted = np.where(n >= obs.n1,
                       detector.poisson_counts(D, t - obs.t1, np.maximum(n - obs.n1, 0)), 0.0)
    if D * (t - obs.t1) > 0:
        gauss = detector.bayes_gaussian(D, obs, t, n)
    else:
        gauss = np.full(size, math.nan)
    columns = ["n", "conditioned", "shifted_poisson", "gaussian", "unconditioned"]
    rows = [[int(k), a, b, c, d] for k, a, b, c, d in zip(n, pc, shifted, gauss, pf)]
    return [_emit(cfg, stem + ext, columns, rows)], None


def run_projection(cfg, stem, ext):
    a, t = cfg.option("a"), cfg.integration.t_end
    rows = []
    for dt in sorted(cfg.option("dt"), reverse=True):
        s = flat_decay.projection_limit(a, dt, t)
        rows.append([dt, t / dt, s, 1 - s])
    return [_emit(cfg, stem + ext, ["dt", "n_checks", "survival", "deficit"], rows)], None


RUNNERS = {
    "detector": run_detector,
    "flat-decay": run_flat_decay,
    "cavity": run_cavity,
    "bayes": run_bayes,
    "projection": run_projection,
}


def run(cfg: ScenarioConfig, out_dir: str | None = None) -> list[str]:
    """Run one scenario and write its output files; returns their paths."""
    stem, ext = _paths(cfg, out_dir)
    return RUNNERS[cfg.scenario](cfg, stem, ext)[0]


# -- sweeps ------------------------------------------------------------------

def point_config(cfg: ScenarioConfig, value: float) -> ScenarioConfig:
    point = cfg.with_value(cfg.sweep.parameter, value)
    stem, ext = os.path.splitext(cfg.output.path)
    path = f"{stem}_{cfg.sweep.parameter}={value!r}{ext}"
    return replace(point, output=replace(point.output, path=path))


def _sweep_row(point: ScenarioConfig, value: float, out_dir):
    try:
        stem, ext = _paths(point, out_dir)
        _, summary = RUNNERS[point.scenario](point, stem, ext)
        return [value, *summary, "ok"]
    except Exception as exc:  # recorded per row, the sweep goes on
        msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        return [value, math.nan, math.nan, math.nan, "n/a", math.nan, msg]


def _sweep_job(args):
    return _sweep_row(*args)


def sweep(cfg: ScenarioConfig, out_dir: str | None = None, jobs: int = 1) -> list[str]:
    """Run every sweep point and write one report row per value, in ascending order."""
    if cfg.sweep is None:
        raise ValueError("config has no [sweep] block")
    values = sorted(cfg.sweep.values)
    tasks = [(point_config(cfg, v), v, out_dir) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_job, tasks))
    else:
        rows = [_sweep_job(t) for t in tasks]
    stem, ext = _paths(cfg, out_dir)
    columns = [cfg.sweep.parameter if c == "value" else c for c in SWEEP_COLUMNS]
    return [_emit(cfg, stem + "_sweep" + ext, columns, rows)]
