"""Explicit Runge-Kutta integration of linear, time-independent ODE systems
dy/dt = L y, plus the continuum discretizations the scenarios share.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ContinuumGrid, InvalidGrid, Trajectory, check_times

DEFAULT_TOL = 1e-9
DEFAULT_LEVELS = 2001
BANDWIDTH_FACTOR = 40.0


class StepLimitExceeded(RuntimeError):
    pass


class NonFiniteState(FloatingPointError):
    pass


def default_tolerance() -> float:
    env = os.environ.get("ZENOSIM_TOL")
    if env:
        tol = float(env)
        if not tol > 0:
            raise ValueError(f"ZENOSIM_TOL must be positive, got {env!r}")
        return tol
    return DEFAULT_TOL


@dataclass(frozen=True)
class LinearGenerator:
    """y -> L y on a flat packed state vector of length `dim`."""

    apply: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, y):
        return self.apply(y)

    @classmethod
    def from_matrix(cls, M) -> "LinearGenerator":
        M = np.asarray(M, dtype=float)
        return cls(apply=lambda y: M @ y, dim=M.shape[0])

    def matrix(self) -> np.ndarray:
        """Dense matrix of the action, by probing unit vectors. Small systems only."""
        eye = np.eye(self.dim)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.dim)])


@dataclass(frozen=True)
class IntegrationControl:
    """method 'rk45' (adaptive Dormand-Prince) or 'rk4' (fixed step).

    For rk45, `tol` is the relative error target per step and `atol` the
    absolute floor; `step` is an optional first-step guess. For rk4, `step`
    is the maximal step size.
    """

    method: str = "rk45"
    tol: float = field(default_factory=default_tolerance)
    atol: float | None = None
    step: float | None = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.atol is not None and not self.atol > 0:
            raise ValueError("atol must be positive")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if self.method == "rk4" and self.step is None:
            raise ValueError("rk4 needs a step size")

    @property
    def abs_tol(self) -> float:
        return self.atol if self.atol is not None else self.tol


# Dormand-Prince 5(4)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite state at t={t}")


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate_rk4(f, y0, times, ctl):
    out = np.empty((len(times), len(y0)))
    out[0] = y0
    y = y0.copy()
    n_steps = 0
    for k in range(1, len(times)):
        span = times[k] - times[k - 1]
        n_sub = max(1, math.ceil(span / ctl.step - 1e-9))
        h = span / n_sub
        for _ in range(n_sub):
            y = _rk4_step(f, y, h)
            n_steps += 1
            if n_steps > ctl.max_steps:
                raise StepLimitExceeded(f"more than {ctl.max_steps} steps")
        _check_finite(y, times[k])
        out[k] = y
    return out


def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _initial_step(f, y0, f0, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        return 1e-6
    return 0.01 * d0 / d1


def _integrate_rk45(f, y0, times, ctl):
    rtol, atol = ctl.tol, ctl.abs_tol
    out = np.empty((len(times), len(y0)))
    out[0] = y0
    y = y0.copy()
    t = 0.0
    k1 = f(y)
    h = ctl.step if ctl.step is not None else _initial_step(f, y, k1, rtol, atol)
    n_steps = 0
    for k in range(1, len(times)):
        t_out = times[k]
        while t < t_out:
            n_steps += 1
            if n_steps > ctl.max_steps:
                raise StepLimitExceeded(f"more than {ctl.max_steps} steps at t={t}")
            last = t + h >= t_out * (1 - 1e-13)
            h_try = t_out - t if last else h
            ks = [k1]
            for i in range(1, 7):
                yi = y.copy()
                for a, kj in zip(_A[i], ks):
                    if a:
                        yi += (h_try * a) * kj
                ks.append(f(yi))
            y_new = yi  # stage 7 is evaluated at the 5th-order solution
            err = h_try * sum(e * kj for e, kj in zip(_E, ks) if e)
            norm = _error_norm(err, y, y_new, rtol, atol)
            if norm <= 1.0:
                t = t_out if last else t + h_try
                y = y_new
                k1 = ks[6]
                _check_finite(y, t)
                factor = 5.0 if norm == 0 else min(5.0, 0.9 * norm ** -0.2)
                if not last:
                    h = h_try * factor
                else:
                    h = max(h, h_try * factor) if factor > 1 else h_try * factor
            else:
                if not np.isfinite(norm):
                    raise NonFiniteState(f"non-finite error estimate at t={t}")
                h = h_try * max(0.2, 0.9 * norm ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    raise StepLimitExceeded(f"step size underflow at t={t}")
        out[k] = y
    return out


def integrate(gen: LinearGenerator, y0, times, ctl: IntegrationControl | None = None,
              unpack=None) -> Trajectory:
    """Integrate dy/dt = L y from y(0) = y0, with snapshots at exactly `times`."""
    ctl = ctl or IntegrationControl()
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (gen.dim,):
        raise ValueError(f"initial state has shape {y0.shape}, generator dimension is {gen.dim}")
    times = check_times(times)
    _check_finite(y0, 0.0)
    if ctl.method == "rk4":
        ys = _integrate_rk4(gen.apply, y0, times, ctl)
    else:
        ys = _integrate_rk45(gen.apply, y0, times, ctl)
    return Trajectory(times=times, ys=ys, unpack=unpack)


def default_half_bandwidth(*widths: float) -> float:
    return BANDWIDTH_FACTOR * max(widths) / 2


def _uniform_energies(e_center, half_bandwidth, n_levels):
    if n_levels < 2:
        raise InvalidGrid("need at least two levels")
    if not half_bandwidth > 0:
        raise InvalidGrid("half_bandwidth must be positive")
    energies = np.linspace(e_center - half_bandwidth, e_center + half_bandwidth, n_levels)
    return energies, energies[1] - energies[0]


def discretize_flat_continuum(gamma0: float, e_center: float, half_bandwidth: float,
                              n_levels: int = DEFAULT_LEVELS, taper: float = 0.0) -> ContinuumGrid:
    """Uniform levels with constant coupling sqrt(gamma0 * dE / 2 pi).

    With taper > 0 the squared couplings roll off as cos**2 over the outer
    `taper` fraction of the half band, which removes the ringing a sharp band
    edge imprints on the dynamics (period 2 pi / half_bandwidth).
    """
    if gamma0 < 0:
        raise InvalidGrid("gamma0 must be nonnegative")
    if not 0 <= taper <= 1:
        raise InvalidGrid("taper must lie in [0, 1]")
    energies, dE = _uniform_energies(e_center, half_bandwidth, n_levels)
    profile = np.ones(n_levels)
    if taper > 0:
        x = (np.abs(energies - e_center) - (1 - taper) * half_bandwidth) / (taper * half_bandwidth)
        profile = np.cos(0.5 * math.pi * np.clip(x, 0.0, 1.0)) ** 2
    couplings = np.sqrt(gamma0 * dE / (2 * math.pi) * profile)
    return ContinuumGrid(energies, couplings, np.full(n_levels, dE))


def lorentzian_density(energy, e1: float, gamma1: float):
    """Normalized Lorentzian density of states centered at e1 with FWHM gamma1."""
    return (gamma1 / (2 * math.pi)) / ((np.asarray(energy) - e1) ** 2 + gamma1**2 / 4)


def discretize_lorentzian_continuum(omega_alpha: float, e1: float, gamma1: float,
                                    half_bandwidth: float,
                                    n_levels: int = DEFAULT_LEVELS) -> ContinuumGrid:
    """Uniform levels whose squared couplings follow a Lorentzian density.

    Omega_alpha**2 is proportional to rho(E_alpha) dE and scaled so that the
    couplings add up to the total dot coupling, sum Omega_alpha**2 = omega_alpha**2.
    """
    if not gamma1 > 0:
        raise InvalidGrid("gamma1 must be positive")
    if omega_alpha < 0:
        raise InvalidGrid("omega_alpha must be nonnegative")
    energies, dE = _uniform_energies(e1, half_bandwidth, n_levels)
    weight = lorentzian_density(energies, e1, gamma1) * dE
    couplings = omega_alpha * np.sqrt(weight / weight.sum())
    return ContinuumGrid(energies, couplings, np.full(n_levels, dE))
