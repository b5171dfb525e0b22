"""Dot coupled to a broadened cavity level (Lorentzian density of states).

Level 0 is the dot (watched by the point contact), level 1 the cavity of
width gamma1, and alpha the flat reservoir behind the cavity.

Packed layout with an N-level reservoir grid (length 4 + 5N):
    [s00, s11, s_aa[0..N-1], Re s01, Im s01,
     Re/Im s_1a pairs (N), Re/Im s_a0 pairs (N)]
Without a grid the reservoir is collapsed into one population p_R fed at
gamma1 * s11 (the unbounded-band limit), layout [s00, s11, Re s01, Im s01, p_R].
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import FitFailure, RateFit, fit_decay_rate
from .core import (
    EPS_TRACE,
    ContinuumGrid,
    InvalidGrid,
    InvalidParams,
    ModelParams,
    TracedState,
    Trajectory,
    validate_params,
)
from .flat_decay import band_loss
from .integrator import (
    IntegrationControl,
    LinearGenerator,
    default_half_bandwidth,
    discretize_flat_continuum,
    integrate,
)

ZENO, ANTI_ZENO, CROSSOVER = "Zeno", "AntiZeno", "Crossover"
ALIGNED_BELOW = 1 / 3
MISALIGNED_ABOVE = 3.0
WEAK_DAMPING = 0.025
FIT_TOL = 1e-9


# -- closed forms ----------------------------------------------------------

def effective_decay_rate(omega_alpha: float, gamma1: float, gamma_d: float,
                         delta_e: float) -> float:
    """4 (G1 + Gd) W^2 / (4 dE^2 + (G1 + Gd)^2)."""
    width = gamma1 + gamma_d
    if not width > 0:
        raise ValueError("gamma1 + gamma_d must be positive")
    return 4 * width * omega_alpha**2 / (4 * delta_e**2 + width**2)


def short_time_survival(omega_alpha: float, t):
    """1 - (W t)^2; the coefficient is the energy variance of the initial dot state."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(omega_alpha * t_arr) > 0.1):
        warnings.warn("quadratic law used outside omega_alpha * t << 1", stacklevel=2)
    out = 1 - (omega_alpha * t_arr) ** 2
    return float(out) if out.ndim == 0 else out


def weak_damping(params: ModelParams, gamma_d: float) -> bool:
    """Whether the long-time rate law is expected to hold (G_eff << W and << G1)."""
    g = effective_decay_rate(params.omega_alpha, params.gamma1, gamma_d, params.e1 - params.e0)
    return g <= WEAK_DAMPING * min(params.omega_alpha, params.gamma1)


# -- generators ----------------------------------------------------------------

def closed_block_generator(params: ModelParams, gamma_d: float) -> LinearGenerator:
    om, g1 = params.omega_alpha, params.gamma1
    e10 = params.e1 - params.e0
    damp = (g1 + gamma_d) / 2
    # y = [s00, s11, Re s01, Im s01, p_R]
    M = np.array([
        [0.0, 0.0, 0.0, -2 * om, 0.0],
        [0.0, -g1, 0.0, 2 * om, 0.0],
        [0.0, 0.0, -damp, -e10, 0.0],
        [om, -om, e10, -damp, 0.0],
        [0.0, g1, 0.0, 0.0, 0.0],
    ])
    return LinearGenerator.from_matrix(M)


def full_generator(params: ModelParams, grid: ContinuumGrid, gamma_d: float) -> LinearGenerator:
    n = len(grid)
    om, g1 = params.omega_alpha, params.gamma1
    g = grid.couplings
    e10 = params.e1 - params.e0
    rot_1a = 1j * (grid.energies - params.e1) - g1 / 2
    rot_a0 = 1j * (params.e0 - grid.energies) - gamma_d / 2
    i01, i1a, ia0 = 2 + n, 4 + n, 4 + 3 * n

    def apply(y):
        s00, s11 = y[0], y[1]
        s01 = y[i01] + 1j * y[i01 + 1]
        c1a = y[i1a:ia0:2] + 1j * y[i1a + 1 : ia0 : 2]
        ca0 = y[ia0::2] + 1j * y[ia0 + 1 :: 2]

        d01 = (1j * e10 - (g1 + gamma_d) / 2) * s01 + 1j * om * (s00 - s11)
        d1a = rot_1a * c1a - 1j * om * np.conj(ca0) + 1j * g * s11
        da0 = rot_a0 * ca0 - 1j * g * np.conj(s01) + 1j * om * np.conj(c1a)

        dy = np.empty_like(y)
        dy[0] = -2 * om * s01.imag
        dy[1] = -g1 * s11 + 2 * om * s01.imag
        dy[2:i01] = 2 * g * c1a.imag
        dy[i01], dy[i01 + 1] = d01.real, d01.imag
        dy[i1a:ia0:2], dy[i1a + 1 : ia0 : 2] = d1a.real, d1a.imag
        dy[ia0::2], dy[ia0 + 1 :: 2] = da0.real, da0.imag
        return dy

    return LinearGenerator(apply=apply, dim=4 + 5 * n)


def _unpack_closed(y) -> TracedState:
    return TracedState(
        sigma_00=float(y[0]),
        sigma_alpha_alpha=np.array([y[4]]),
        sigma_alpha_0=np.zeros(0, dtype=complex),
        sigma_11=float(y[1]),
        sigma_01=complex(y[2], y[3]),
        sigma_1alpha=np.zeros(0, dtype=complex),
    )


def _unpacker_full(n):
    i01, i1a, ia0 = 2 + n, 4 + n, 4 + 3 * n

    def unpack(y) -> TracedState:
        return TracedState(
            sigma_00=float(y[0]),
            sigma_alpha_alpha=y[2:i01].copy(),
            sigma_alpha_0=y[ia0::2] + 1j * y[ia0 + 1 :: 2],
            sigma_11=float(y[1]),
            sigma_01=complex(y[i01], y[i01 + 1]),
            sigma_1alpha=y[i1a:ia0:2] + 1j * y[i1a + 1 : ia0 : 2],
        )

    return unpack


def default_reservoir_grid(params: ModelParams, gamma_d: float = 0.0,
                           n_levels: int = 2001) -> ContinuumGrid:
    """Flat reservoir of width gamma1 centered between the dot and cavity levels."""
    half = default_half_bandwidth(params.gamma1 + gamma_d) + abs(params.e1 - params.e0) / 2
    return discretize_flat_continuum(params.gamma1, (params.e0 + params.e1) / 2, half, n_levels)


def _check_cavity(params, gamma_d):
    validate_params(params)
    if gamma_d < 0:
        raise InvalidParams("gamma_d must be nonnegative")
    if not params.gamma1 > 0:
        raise InvalidParams("the cavity needs gamma1 > 0")


def evolve_cavity(params: ModelParams, grid: ContinuumGrid | None, gamma_d: float, times,
                  ctl: IntegrationControl | None = None) -> Trajectory:
    """Dot + cavity (+ reservoir) dynamics from sigma_00(0) = 1.

    grid=None evolves the dot-cavity block with an aggregated reservoir
    population, which is all sigma_00 needs. With a grid every reservoir
    level and coherence is kept; its width at E1 must equal params.gamma1.
    Observables: survival (s00), cavity (s11), trace.
    """
    _check_cavity(params, gamma_d)
    if grid is None:
        gen = closed_block_generator(params, gamma_d)
        y0 = np.zeros(5)
        y0[0] = 1.0
        traj = integrate(gen, y0, times, ctl, unpack=_unpack_closed)
        trace = traj.ys[:, 0] + traj.ys[:, 1] + traj.ys[:, 4]
    else:
        g1 = grid.width_at(params.e1)
        if not math.isclose(g1, params.gamma1, rel_tol=1e-9, abs_tol=1e-12):
            raise InvalidGrid(f"grid width at E1 is {g1:.6g}, params.gamma1 is {params.gamma1:.6g}")
        n = len(grid)
        gen = full_generator(params, grid, gamma_d)
        y0 = np.zeros(gen.dim)
        y0[0] = 1.0
        traj = integrate(gen, y0, times, ctl, unpack=_unpacker_full(n))
        trace = traj.ys[:, 0] + traj.ys[:, 1] + traj.ys[:, 2 : 2 + n].sum(axis=1)
    return traj.with_observables(survival=traj.ys[:, 0], cavity=traj.ys[:, 1], trace=trace)


def cavity_trace_tolerance(params: ModelParams, grid: ContinuumGrid, gamma_d: float,
                           eps_trace: float = EPS_TRACE) -> float:
    """Trace drift allowed on a finite reservoir band (lines at E0 and E1, width G1 + Gd)."""
    width = params.gamma1 + gamma_d
    loss = max(band_loss(grid, params.e0, width), band_loss(grid, params.e1, width))
    return eps_trace + 4 * loss


# -- regimes -------------------------------------------------------------------

def fit_window(params: ModelParams, gamma_d: float) -> tuple[float, float]:
    """Long-time window: after the cavity transients, spanning a few predicted lifetimes
    and at least four Rabi half-periods (pi / omega_alpha) for underdamped curves."""
    g1 = params.gamma1
    pred = effective_decay_rate(params.omega_alpha, g1, gamma_d, params.e1 - params.e0)
    t_a = 10.0 / min(g1, (g1 + gamma_d) / 2)
    span = 4.0 / min(pred, g1 / 2)
    if params.omega_alpha > 0:
        span = max(span, 4 * math.pi / params.omega_alpha)
    return t_a, t_a + span


def _fit_control():
    return IntegrationControl(tol=FIT_TOL, atol=1e-18)


def fitted_rate(params: ModelParams, gamma_d: float, n_points: int = 4001,
                ctl: IntegrationControl | None = None) -> RateFit:
    t_a, t_b = fit_window(params, gamma_d)
    times = np.linspace(0.0, t_b, n_points)
    traj = evolve_cavity(params, None, gamma_d, times, ctl or _fit_control())
    return fit_decay_rate(times, traj.observables["survival"], t_a, t_b)


def _survival_gap(params, gamma_d, times, ctl):
    meas = evolve_cavity(params, None, gamma_d, times, ctl).observables["survival"]
    bare = evolve_cavity(params, None, 0.0, times, ctl).observables["survival"]
    return meas - bare


def zeno_window(params: ModelParams, gamma_d: float, t_end: float, n_points: int = 2001,
                rel_tol: float = 1e-4, ctl: IntegrationControl | None = None) -> float:
    """First time the measured survival drops below the unmeasured one.

    Located on a uniform grid over (0, t_end] and refined by bisection.
    Returns inf when no crossing occurs before t_end.
    """
    if gamma_d == 0:
        return math.inf
    ctl = ctl or _fit_control()
    times = np.linspace(0.0, t_end, n_points)
    gap = _survival_gap(params, gamma_d, times, ctl)
    below = np.nonzero(gap[1:] < 0)[0]
    if len(below) == 0:
        return math.inf
    k = below[0] + 1
    lo, hi = times[k - 1], times[k]
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _survival_gap(params, gamma_d, [0.0, mid], ctl)[-1] < 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def detuning_regime(delta_e: float, width: float) -> str:
    ratio = delta_e / width
    if ratio < ALIGNED_BELOW:
        return "aligned"
    if ratio > MISALIGNED_ABOVE:
        return "misaligned"
    return "intermediate"


@dataclass(frozen=True)
class RegimeReport:
    delta_e: float
    total_width: float
    gamma_d: float
    classification: str
    detuning_regime: str
    fitted_rate: float
    unmeasured_rate: float
    predicted_rate: float
    rate_ratio: float
    t_star: float
    params: ModelParams

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_star"] = None if math.isinf(self.t_star) else self.t_star
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classify_regime(params: ModelParams, gamma_d: float,
                    ctl: IntegrationControl | None = None) -> RegimeReport:
    """Compare the measured long-time decay with the unmeasured one.

    Zeno when measurement slows the decay, AntiZeno when it speeds it up,
    Crossover when nothing is measured (gamma_d = 0).
    """
    _check_cavity(params, gamma_d)
    delta_e = abs(params.e1 - params.e0)
    width = params.gamma1 + gamma_d
    measured = fitted_rate(params, gamma_d, ctl=ctl).rate
    bare = measured if gamma_d == 0 else fitted_rate(params, 0.0, ctl=ctl).rate
    ratio = measured / bare
    if gamma_d == 0:
        tag = CROSSOVER
    else:
        tag = ZENO if ratio < 1 else ANTI_ZENO
    horizon = fit_window(params, gamma_d)[1]
    return RegimeReport(
        delta_e=float(delta_e),
        total_width=float(width),
        gamma_d=float(gamma_d),
        classification=tag,
        detuning_regime=detuning_regime(delta_e, width),
        fitted_rate=measured,
        unmeasured_rate=bare,
        predicted_rate=effective_decay_rate(params.omega_alpha, params.gamma1, gamma_d,
                                            delta_e),
        rate_ratio=ratio,
        t_star=zeno_window(params, gamma_d, horizon, ctl=ctl),
        params=params,
    )


__all__ = [
    "ANTI_ZENO", "CROSSOVER", "ZENO", "FitFailure", "RegimeReport", "classify_regime",
    "closed_block_generator", "default_reservoir_grid", "effective_decay_rate",
    "evolve_cavity", "fit_window", "fitted_rate", "full_generator", "short_time_survival",
    "weak_damping", "zeno_window", "cavity_trace_tolerance", "detuning_regime",
]
