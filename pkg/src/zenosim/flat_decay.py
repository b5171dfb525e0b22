"""Decay of the dot electron into a flat continuum, with and without the
point-contact detector.

Packed layout of a traced state on an N-level grid (length 1 + 3N):
    [sigma_00, sigma_aa[0..N-1], Re s_a0[0], Im s_a0[0], Re s_a0[1], ...]
A count-resolved state stacks n_max + 1 such blocks in order of n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import fit_decay_rate, half_max_crossings, richardson
from .core import (
    EPS_TRACE,
    EPS_TRUNC,
    ContinuumGrid,
    CountResolvedState,
    InvalidGrid,
    InvalidParams,
    ModelParams,
    TracedState,
    TruncationLeak,
    check_times,
    derived_rates,
    validate_params,
)
from .detector import auto_n_max
from .integrator import IntegrationControl, LinearGenerator, discretize_flat_continuum, integrate


class InvalidStep(ValueError):
    pass


# -- packing ---------------------------------------------------------------

def block_size(n_levels: int) -> int:
    return 1 + 3 * n_levels


def pack_traced(state: TracedState) -> np.ndarray:
    n = len(state.sigma_alpha_alpha)
    y = np.empty(block_size(n))
    y[0] = state.sigma_00
    y[1 : 1 + n] = state.sigma_alpha_alpha
    y[1 + n :: 2] = np.real(state.sigma_alpha_0)
    y[2 + n :: 2] = np.imag(state.sigma_alpha_0)
    return y


def unpack_traced(y: np.ndarray) -> TracedState:
    n = (len(y) - 1) // 3
    return TracedState(
        sigma_00=float(y[0]),
        sigma_alpha_alpha=y[1 : 1 + n].copy(),
        sigma_alpha_0=y[1 + n :: 2] + 1j * y[2 + n :: 2],
    )


def _unpacker_resolved(n_levels):
    size = block_size(n_levels)

    def unpack(y):
        blocks = y.reshape(-1, size)
        return CountResolvedState(tuple(unpack_traced(b) for b in blocks))

    return unpack


def initial_state(n_levels: int, n_blocks: int = 1) -> np.ndarray:
    y = np.zeros(n_blocks * block_size(n_levels))
    y[0] = 1.0
    return y


# -- generators ------------------------------------------------------------

def _grid_gamma0(grid: ContinuumGrid, e0: float) -> float:
    return grid.width_at(e0)


def bloch_generator(grid: ContinuumGrid, e0: float, gamma0: float,
                    gamma_d: float) -> LinearGenerator:
    """Traced rate equations: dot decay at gamma0, coherences damped at (gamma0 + gamma_d)/2."""
    n = len(grid)
    om = grid.couplings
    rot = 1j * (e0 - grid.energies) - (gamma0 + gamma_d) / 2

    def apply(y):
        s00 = y[0]
        c = y[1 + n :: 2] + 1j * y[2 + n :: 2]
        dc = rot * c - 1j * om * s00
        dy = np.empty_like(y)
        dy[0] = -gamma0 * s00
        dy[1 : 1 + n] = -2 * om * c.imag
        dy[1 + n :: 2] = dc.real
        dy[2 + n :: 2] = dc.imag
        return dy

    return LinearGenerator(apply=apply, dim=block_size(n))


def n_resolved_generator(grid: ContinuumGrid, e0: float, gamma0: float, D: float,
                         Dprime: float, n_max: int) -> LinearGenerator:
    """Count-resolved rate equations; block n_max aggregates all n >= n_max."""
    n = len(grid)
    size = block_size(n)
    om = grid.couplings
    rot = 1j * (e0 - grid.energies) - (gamma0 + D + Dprime) / 2
    hop = math.sqrt(D * Dprime)

    def apply(y):
        Y = y.reshape(n_max + 1, size)
        s00 = Y[:, 0]
        saa = Y[:, 1 : 1 + n]
        c = Y[:, 1 + n :: 2] + 1j * Y[:, 2 + n :: 2]

        d00 = -(gamma0 + Dprime) * s00
        d00[1:] += Dprime * s00[:-1]
        d00[-1] += Dprime * s00[-1]

        daa = -D * saa - 2 * om * c.imag
        daa[1:] += D * saa[:-1]
        daa[-1] += D * saa[-1]

        dc = rot * c - 1j * om * s00[:, None]
        dc[1:] += hop * c[:-1]
        dc[-1] += hop * c[-1]

        dY = np.empty_like(Y)
        dY[:, 0] = d00
        dY[:, 1 : 1 + n] = daa
        dY[:, 1 + n :: 2] = dc.real
        dY[:, 2 + n :: 2] = dc.imag
        return dY.ravel()

    return LinearGenerator(apply=apply, dim=(n_max + 1) * size)


# -- trajectories ------------------------------------------------------------

def band_loss(grid: ContinuumGrid, e0: float, width: float) -> float:
    """Weight of a Lorentzian line (FWHM `width`, centered at e0) that the grid misses.

    Counts the part outside the band plus the part cut by tapered couplings.
    """
    if width <= 0:
        return 0.0
    dE = grid.weights
    lo = grid.energies[0] - dE[0] / 2
    hi = grid.energies[-1] + dE[-1] / 2
    inside = (math.atan(2 * (hi - e0) / width) - math.atan(2 * (lo - e0) / width)) / math.pi
    cut = 1 - grid.widths() / grid.width_at(e0)
    tapered = float(np.sum(lorentzian(grid.energies, e0, width) * dE * np.clip(cut, 0, 1)))
    return max(0.0, 1.0 - inside + tapered)


def trace_tolerance(grid: ContinuumGrid, e0: float, gamma0: float, gamma_d: float,
                    eps_trace: float = EPS_TRACE) -> float:
    """Trace drift allowed for the traced equations on a finite band.

    The reduced dot equation describes decay into an unbounded continuum, so
    the tracked levels miss the part of the line outside the band; transient
    populations can reach four times the final value.
    """
    return eps_trace + 4 * band_loss(grid, e0, gamma0 + gamma_d)


def evolve_bloch(params: ModelParams, grid: ContinuumGrid, gamma_d: float, times,
                 ctl: IntegrationControl | None = None):
    """Traced dynamics from sigma_00(0) = 1.

    The dot width is reconstructed from the grid at E0 (2 pi rho Omega^2);
    params.gamma0 must agree with it.
    """
    validate_params(params)
    if gamma_d < 0:
        raise InvalidParams("gamma_d must be nonnegative")
    gamma0 = _grid_gamma0(grid, params.e0)
    if not math.isclose(gamma0, params.gamma0, rel_tol=1e-9, abs_tol=1e-12):
        raise InvalidGrid(
            f"grid width at E0 is {gamma0:.6g}, params.gamma0 is {params.gamma0:.6g}"
        )
    gen = bloch_generator(grid, params.e0, gamma0, gamma_d)
    traj = integrate(gen, initial_state(len(grid)), times, ctl, unpack=unpack_traced)
    n = len(grid)
    trace = traj.ys[:, 0] + traj.ys[:, 1 : 1 + n].sum(axis=1)
    return traj.with_observables(survival=traj.ys[:, 0], trace=trace)


def evolve_n_resolved(params: ModelParams, grid: ContinuumGrid, times, n_max: int | None = None,
                      eps_trunc: float = EPS_TRUNC, ctl: IntegrationControl | None = None):
    """Joint detector-electron dynamics resolved in the collector count n.

    Observables: survival (sum_n sigma_00^(n)), count_probabilities (rows of
    P_n), mean_count and mean_current = sum_n n d/dt tr sigma^(n).
    """
    validate_params(params)
    D, Dprime, _ = derived_rates(params)
    gamma0 = _grid_gamma0(grid, params.e0)
    if not math.isclose(gamma0, params.gamma0, rel_tol=1e-9, abs_tol=1e-12):
        raise InvalidGrid(
            f"grid width at E0 is {gamma0:.6g}, params.gamma0 is {params.gamma0:.6g}"
        )
    times = np.asarray(times, dtype=float)
    if n_max is None:
        n_max = max(1, auto_n_max(D * times[-1], eps_trunc))
    n = len(grid)
    size = block_size(n)
    gen = n_resolved_generator(grid, params.e0, gamma0, D, Dprime, n_max)
    traj = integrate(gen, initial_state(n, n_max + 1), times, ctl,
                     unpack=_unpacker_resolved(n))

    blocks = traj.ys.reshape(len(times), n_max + 1, size)
    probs = blocks[:, :, 0] + blocks[:, :, 1 : 1 + n].sum(axis=2)
    counts = np.arange(n_max + 1)
    leak = probs[:, -1]
    if leak.max() > eps_trunc:
        raise TruncationLeak(f"{leak.max():.3e} reached the top count block n_max={n_max}")
    current = np.empty(len(times))
    for k, y in enumerate(traj.ys):
        dY = gen.apply(y).reshape(n_max + 1, size)
        current[k] = counts @ (dY[:, 0] + dY[:, 1 : 1 + n].sum(axis=1))
    return traj.with_observables(
        survival=blocks[:, :, 0].sum(axis=1),
        count_probabilities=probs,
        mean_count=probs @ counts,
        mean_current=current,
        trace=probs.sum(axis=1),
    )


def _extrapolate_band(params, times, half_bandwidth, taper, ctl):
    # level spacing pi / t_max keeps the grid recurrence time 2 pi / spacing at 2 t_max
    spacing = math.pi / times[-1]
    currents = []
    for w in (half_bandwidth, 2 * half_bandwidth):
        n_levels = int(round(2 * w / spacing)) + 1
        grid = discretize_flat_continuum(params.gamma0, params.e0, w, n_levels, taper=taper)
        currents.append(evolve_n_resolved(params, grid, times, ctl=ctl).observables["mean_current"])
    return richardson(currents[0], currents[1], ratio=2.0, order=1)


def band_extrapolated_current(params: ModelParams, times, half_bandwidth: float = 100.0,
                              taper: float = 0.5, early_half_bandwidth: float | None = None,
                              handoff: float = 20.0,
                              ctl: IntegrationControl | None = None) -> np.ndarray:
    """Mean current with the band-truncation error removed.

    Runs the count-resolved equations on tapered flat grids of half width W
    and 2W and extrapolates linearly in 1/W. That expansion fails for
    t < ~1/W, where the decayed probability is spread wider than the band
    and the error is a function of W t (peak ~3/W near t ~ 2/W). Times up to
    handoff / W are therefore redone on a wider band, early_half_bandwidth
    (default 16 W), over that short window only. Each window uses the coarsest
    level spacing whose recurrence time exceeds it.
    """
    times = check_times(times)
    if times[-1] == 0:
        return np.array([derived_rates(params)[1]])  # the dot starts occupied
    early_w = early_half_bandwidth or 16 * half_bandwidth
    current = _extrapolate_band(params, times, half_bandwidth, taper, ctl)
    early = times <= handoff / half_bandwidth
    if np.count_nonzero(early) > 1 and early_w > half_bandwidth:
        current[early] = _extrapolate_band(params, times[early], early_w, taper, ctl)
    return current


def trace_over_counts(traj, n_levels: int) -> np.ndarray:
    """Packed traced states obtained by summing the count blocks of each snapshot."""
    return traj.ys.reshape(len(traj), -1, block_size(n_levels)).sum(axis=1)


def amplitude_generator(grid: ContinuumGrid, e0: float) -> LinearGenerator:
    """Schrodinger equation for (b0, b_alpha), packed as interleaved re/im pairs."""
    n = len(grid)
    om = grid.couplings
    ea = grid.energies

    def apply(y):
        b = y[0::2] + 1j * y[1::2]
        b0, ba = b[0], b[1:]
        db = np.empty(n + 1, dtype=complex)
        db[0] = -1j * e0 * b0 - 1j * (om @ ba)
        db[1:] = -1j * ea * ba - 1j * om * b0
        dy = np.empty_like(y)
        dy[0::2] = db.real
        dy[1::2] = db.imag
        return dy

    return LinearGenerator(apply=apply, dim=2 * (n + 1))


def evolve_amplitudes_qd(params: ModelParams, grid: ContinuumGrid, times,
                         ctl: IntegrationControl | None = None):
    """Closed Schrodinger evolution of dot + discrete continuum, b0(0) = 1.

    Independent of the rate equations; used as their oracle. Observables:
    survival |b0|^2 and norm.
    """
    validate_params(params)
    if params.delta_omega != 0:
        raise InvalidParams("the amplitude oracle describes the unmeasured dot only (delta_omega = 0)")
    gen = amplitude_generator(grid, params.e0)
    y0 = np.zeros(gen.dim)
    y0[0] = 1.0

    def unpack(y):
        return y[0::2] + 1j * y[1::2]

    traj = integrate(gen, y0, times, ctl, unpack=unpack)
    sq = traj.ys**2
    survival = sq[:, 0] + sq[:, 1]
    return traj.with_observables(survival=survival, norm=sq.sum(axis=1))


# -- closed forms ----------------------------------------------------------

def survival_analytic(gamma0: float, t) -> np.ndarray | float:
    if gamma0 < 0 or np.any(np.asarray(t) < 0):
        raise ValueError("need gamma0 >= 0 and t >= 0")
    return np.exp(-gamma0 * np.asarray(t)) if np.ndim(t) else math.exp(-gamma0 * t)


def occupation_alpha_analytic(params: ModelParams, E_alpha, t, omega=None):
    """Unmeasured continuum population of level E_alpha at time t.

    `omega` overrides params.omega_alpha (e.g. with the coupling of a grid level).
    """
    om = params.omega_alpha if omega is None else omega
    g = params.gamma0
    x = np.asarray(E_alpha) - params.e0
    bracket = 1 - 2 * np.cos(x * t) * np.exp(-g * t / 2) + np.exp(-g * t)
    return om**2 / (x**2 + (g / 2) ** 2) * bracket


def detector_current(D: float, Dprime: float, sigma00):
    """Average detector current D' sigma_00 + D (1 - sigma_00), in units e = 1."""
    s = np.asarray(sigma00)
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("sigma00 must lie in [0, 1]")
    out = Dprime * s + D * (1 - s)
    return float(out) if out.ndim == 0 else out


# -- line shapes -------------------------------------------------------------

@dataclass(frozen=True)
class LineShape:
    energies: np.ndarray
    density: np.ndarray
    peak_position: float
    fwhm: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.energies))


def _make_line(energies, density):
    k = int(np.argmax(density))
    xl, xr = half_max_crossings(energies, density)
    return LineShape(np.asarray(energies), np.asarray(density), float(energies[k]), xr - xl)


def lorentzian(energies, center: float, width: float):
    """Unit-normalized Lorentzian with full width at half maximum `width`."""
    x = np.asarray(energies) - center
    return (width / (2 * math.pi)) / (x**2 + width**2 / 4)


def line_shape(gamma0: float, gamma_d: float, e0: float, energies) -> LineShape:
    """Normalized emission line of FWHM gamma0 + gamma_d centered at e0."""
    if not gamma0 > 0:
        raise ValueError("gamma0 must be positive")
    energies = np.asarray(energies, dtype=float)
    return _make_line(energies, lorentzian(energies, e0, gamma0 + gamma_d))


def line_shape_from_state(state: TracedState, grid: ContinuumGrid) -> LineShape:
    """sigma_aa * rho(E_a), normalized to unit integral over the grid."""
    density = np.asarray(state.sigma_alpha_alpha) / grid.weights
    density = density / np.trapezoid(density, grid.energies)
    return _make_line(grid.energies, density)


def steady_time(gamma0: float) -> float:
    return 20.0 / gamma0


def fitted_survival_rate(times, survival, gamma0: float):
    """Log-linear rate fit over the window [1, 5] / gamma0."""
    return fit_decay_rate(times, survival, 1.0 / gamma0, 5.0 / gamma0)


# -- projection-postulate baseline -----------------------------------------------

def repeated_projection_survival(a: float, dt: float, n: int) -> float:
    """[1 - a dt^2]^n: survival after n projective checks spaced by dt."""
    if a * dt**2 >= 1:
        raise InvalidStep(f"a*dt^2 = {a * dt**2} must be below 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return (1 - a * dt**2) ** n


def projection_limit(a: float, dt: float, t: float) -> float:
    """Survival at fixed time t = n dt under projections every dt; tends to 1 as dt -> 0."""
    if a * dt**2 >= 1:
        raise InvalidStep(f"a*dt^2 = {a * dt**2} must be below 1")
    return math.exp((t / dt) * math.log1p(-a * dt**2))
