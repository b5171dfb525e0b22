"""Shared domain types for the point-contact / quantum-dot simulator.

Units: hbar = e = 1. Energies and rates share one reference unit, times are
measured in its inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np

EPS_TRACE = 1e-6
EPS_TRUNC = 1e-6


class InvalidParams(ValueError):
    """A ModelParams invariant is violated."""


class InvalidGrid(ValueError):
    pass


class TruncationLeak(RuntimeError):
    """Too much probability reached the top detector-count block."""


class TraceViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one scenario.

    omega_pc, delta_omega : point-contact hopping and its reduction when the dot is occupied
    rho_l, rho_r, bias    : detector reservoir densities of states and mu_L - mu_R
    e0, e1                : dot and cavity levels
    gamma0, gamma1        : bare dot width (flat continuum) and cavity width
    omega_alpha           : dot-continuum (or dot-cavity) coupling
    """

    omega_pc: float = 0.0
    delta_omega: float = 0.0
    rho_l: float = 1.0
    rho_r: float = 1.0
    bias: float = 1.0
    e0: float = 0.0
    e1: float = 0.0
    gamma0: float = 1.0
    gamma1: float = 1.0
    omega_alpha: float = 1.0

    @classmethod
    def from_detector_rates(cls, D: float, Dprime: float, **kw) -> "ModelParams":
        """Build params whose point contact produces the rates D and D'."""
        rho_l = kw.get("rho_l", 1.0)
        rho_r = kw.get("rho_r", 1.0)
        bias = kw.get("bias", 1.0)
        scale = 2 * math.pi * rho_l * rho_r * bias
        omega = math.sqrt(D / scale)
        omega_prime = math.sqrt(Dprime / scale)
        return cls(omega_pc=omega, delta_omega=omega - omega_prime, **kw)

    @staticmethod
    def field_names() -> list[str]:
        return [f.name for f in fields(ModelParams)]

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def validate_params(p: ModelParams) -> ModelParams:
    for name in ModelParams.field_names():
        value = getattr(p, name)
        if not math.isfinite(value):
            raise InvalidParams(f"{name} must be finite, got {value}")
    for name in ("omega_pc", "rho_l", "rho_r", "gamma0", "gamma1", "omega_alpha"):
        if getattr(p, name) < 0:
            raise InvalidParams(f"{name} must be nonnegative, got {getattr(p, name)}")
    if p.bias <= 0:
        raise InvalidParams(f"bias must be positive, got {p.bias}")
    if p.delta_omega < 0:
        raise InvalidParams(f"delta_omega must be nonnegative, got {p.delta_omega}")
    if p.delta_omega > p.omega_pc:
        raise InvalidParams(
            f"delta_omega ({p.delta_omega}) exceeds omega_pc ({p.omega_pc})"
        )
    return p


def derived_rates(p: ModelParams) -> tuple[float, float, float]:
    """Detector rates (D, D', Gamma_d) with Gamma_d = (sqrt(D) - sqrt(D'))**2."""
    validate_params(p)
    scale = 2 * math.pi * p.rho_l * p.rho_r * p.bias
    D = scale * p.omega_pc**2
    Dprime = scale * (p.omega_pc - p.delta_omega) ** 2
    gamma_d = (math.sqrt(D) - math.sqrt(Dprime)) ** 2
    return D, Dprime, gamma_d


@dataclass(frozen=True)
class ContinuumGrid:
    """Discretized reservoir: level energies, couplings and quadrature weights."""

    energies: np.ndarray
    couplings: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        c = np.asarray(self.couplings, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (e.ndim == c.ndim == w.ndim == 1) or not (len(e) == len(c) == len(w)):
            raise InvalidGrid("energies, couplings and weights must be 1-d of equal length")
        if len(e) == 0:
            raise InvalidGrid("grid has no levels")
        if np.any(np.diff(e) <= 0):
            raise InvalidGrid("energies must be strictly increasing")
        if np.any(w <= 0):
            raise InvalidGrid("weights must be positive")
        for name, arr in (("energies", e), ("couplings", c), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.energies)

    def widths(self) -> np.ndarray:
        """Reconstructed Gamma(E_alpha) = 2 pi rho(E_alpha) Omega_alpha**2, rho = 1/weight."""
        return 2 * math.pi * self.couplings**2 / self.weights

    def width_at(self, energy: float) -> float:
        return float(np.interp(energy, self.energies, self.widths()))


@dataclass(frozen=True)
class TracedState:
    """Electron density matrix after tracing out the detector.

    Only one triangle of the coherences is stored; the conjugates are derived.
    Cavity fields are None for flat-continuum scenarios.
    """

    sigma_00: float
    sigma_alpha_alpha: np.ndarray
    sigma_alpha_0: np.ndarray
    sigma_11: Optional[float] = None
    sigma_01: Optional[complex] = None
    sigma_1alpha: Optional[np.ndarray] = None

    @property
    def sigma_0alpha(self) -> np.ndarray:
        return np.conj(self.sigma_alpha_0)

    @property
    def is_cavity(self) -> bool:
        return self.sigma_11 is not None

    def trace(self) -> float:
        t = self.sigma_00 + float(np.sum(self.sigma_alpha_alpha))
        if self.sigma_11 is not None:
            t += self.sigma_11
        return t

    def check(self, eps_trace: float = EPS_TRACE) -> None:
        diag = [self.sigma_00, *np.atleast_1d(self.sigma_alpha_alpha)]
        if self.sigma_11 is not None:
            diag.append(self.sigma_11)
        diag = np.asarray(diag)
        if np.any(diag < -eps_trace) or np.any(diag > 1 + eps_trace):
            raise TraceViolation("diagonal element outside [0, 1]")
        tr = self.trace()
        if abs(tr - 1) > eps_trace:
            raise TraceViolation(f"trace {tr!r} outside 1 +- {eps_trace}")


@dataclass(frozen=True)
class CountResolvedState:
    """Detector-count resolved blocks sigma^(n); block n_max collects all n >= n_max."""

    blocks: tuple

    @property
    def n_max(self) -> int:
        return len(self.blocks) - 1

    def traced(self) -> TracedState:
        b = self.blocks
        return TracedState(
            sigma_00=sum(x.sigma_00 for x in b),
            sigma_alpha_alpha=np.sum([x.sigma_alpha_alpha for x in b], axis=0),
            sigma_alpha_0=np.sum([x.sigma_alpha_0 for x in b], axis=0),
        )

    def count_probabilities(self) -> np.ndarray:
        return np.array([x.trace() for x in self.blocks])

    def leak(self) -> float:
        return self.blocks[-1].trace()

    def check(self, eps_trace: float = EPS_TRACE, eps_trunc: float = EPS_TRUNC) -> None:
        total = float(self.count_probabilities().sum())
        if abs(total - 1) > eps_trace:
            raise TraceViolation(f"total trace {total!r} outside 1 +- {eps_trace}")
        if self.leak() > eps_trunc:
            raise TruncationLeak(f"{self.leak():.3e} in the top count block")


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of a packed state vector at the requested times.

    `ys[k]` is the packed state at `times[k]`; `unpack` turns one packed row
    into a domain state. Observables are named time series.
    """

    times: np.ndarray
    ys: np.ndarray
    unpack: Optional[Callable[[np.ndarray], object]] = None
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("times must be a nonempty 1-d array")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if len(self.ys) != len(t):
            raise ValueError("states and times differ in length")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.times)

    def state(self, k: int):
        row = self.ys[k]
        return self.unpack(row) if self.unpack is not None else row

    @property
    def states(self) -> list:
        return [self.state(k) for k in range(len(self))]

    def with_observables(self, **obs) -> "Trajectory":
        merged = dict(self.observables)
        merged.update({k: np.asarray(v) for k, v in obs.items()})
        return replace(self, observables=merged)


def check_times(times: Sequence[float]) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) == 0 or t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must start at 0 and increase strictly")
    return t
