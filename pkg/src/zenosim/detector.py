"""Point-contact detector on its own: counting statistics of electrons
arriving in the collector, and Bayesian conditioning on a readout.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from .core import EPS_TRUNC, TruncationLeak
from .integrator import IntegrationControl, LinearGenerator, integrate


class InvalidObservation(ValueError):
    pass


@dataclass(frozen=True)
class CountDistribution:
    """P_n at time t for n = 0..n_max; the last entry holds all n >= n_max."""

    probabilities: np.ndarray
    t: float

    @property
    def n_max(self) -> int:
        return len(self.probabilities) - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(len(self.probabilities))

    def total(self) -> float:
        return float(self.probabilities.sum())

    def mean(self) -> float:
        return float(self.n @ self.probabilities) / self.total()

    def variance(self) -> float:
        m = self.mean()
        return float(((self.n - m) ** 2) @ self.probabilities) / self.total()

    def argmax(self) -> int:
        return int(np.argmax(self.probabilities))

    def check(self, eps_trunc: float = EPS_TRUNC) -> None:
        if np.any(self.probabilities < -eps_trunc):
            raise ValueError("negative probability")
        total = self.total()
        if not (1 - eps_trunc <= total <= 1 + eps_trunc):
            raise ValueError(f"total probability {total} not normalized")


@dataclass(frozen=True)
class ObservationRecord:
    t1: float
    n1: int

    def __post_init__(self):
        if self.t1 < 0 or self.n1 < 0 or int(self.n1) != self.n1:
            raise InvalidObservation(f"bad readout t1={self.t1}, N1={self.n1}")


def auto_n_max(mean_count: float, eps_trunc: float = EPS_TRUNC) -> int:
    """Guideline mu + 10 sqrt(mu), raised until the Poisson tail is far below eps_trunc."""
    if mean_count <= 0:
        return 0
    n = math.ceil(mean_count + 10 * math.sqrt(mean_count))
    while poisson_tail(mean_count, n) > 1e-3 * eps_trunc:
        n += 1
    return n


def poisson_tail(mu: float, n: int) -> float:
    """P(N >= n) for N ~ Poisson(mu)."""

    if n <= 0:
        return 1.0
    return float(gammainc(n, mu))


def poisson_counts(D: float, t: float, n) -> np.ndarray | float:
    """(D t)^n / n! * exp(-D t), evaluated in log space."""
    mu = D * t
    n = np.asarray(n)
    if mu < 0 or np.any(n < 0):
        raise ValueError("need D*t >= 0 and n >= 0")
    if mu == 0:
        out = np.where(n == 0, 1.0, 0.0)
    else:
        out = np.exp(n * math.log(mu) - mu - gammaln(n + 1))
    return float(out) if out.ndim == 0 else out


def gaussian_counts(D: float, t: float, n) -> np.ndarray | float:
    """Large-Dt Gaussian approximation of the Poisson count distribution."""
    mu = D * t
    n = np.asarray(n, dtype=float)
    out = np.exp(-((mu - n) ** 2) / (2 * mu)) / math.sqrt(2 * math.pi * mu)
    return float(out) if out.ndim == 0 else out


def count_generator(D: float, n_max: int) -> LinearGenerator:
    """dP_n/dt = -D P_n + D P_{n-1}; the top block absorbs so total probability is kept."""

    def apply(p):
        dp = -D * p
        dp[1:] += D * p[:-1]
        dp[-1] += D * p[-1]
        return dp

    return LinearGenerator(apply=apply, dim=n_max + 1)


def _count_control(ctl):
    return ctl or IntegrationControl(tol=1e-11, atol=1e-14)


def count_trajectory(D: float, times, n_max: int | None = None,
                     eps_trunc: float = EPS_TRUNC, ctl: IntegrationControl | None = None
                     ) -> list[CountDistribution]:
    """Integrate the counting rate equation from P_n(0) = delta_{n0} over `times`."""
    times = np.asarray(times, dtype=float)
    if D < 0:
        raise ValueError("need D >= 0")
    if n_max is None:
        n_max = auto_n_max(D * times[-1], eps_trunc)
    p0 = np.zeros(n_max + 1)
    p0[0] = 1.0
    traj = integrate(count_generator(D, n_max), p0, times, _count_control(ctl))
    dists = [CountDistribution(np.clip(row, 0.0, None), float(t))
             for t, row in zip(traj.times, traj.ys)]
    for d in dists:
        if n_max > 0 and d.probabilities[-1] > eps_trunc:
            raise TruncationLeak(
                f"P(n >= {n_max}) = {d.probabilities[-1]:.3e} at t={d.t} exceeds {eps_trunc}"
            )
    return dists


def evolve_counts(D: float, t_end: float, n_max: int | None = None,
                  eps_trunc: float = EPS_TRUNC, ctl: IntegrationControl | None = None
                  ) -> CountDistribution:
    """Count distribution at t_end, from the rate equation with P_n(0) = delta_{n0}."""
    if t_end < 0:
        raise ValueError("need t_end >= 0")
    times = [0.0, t_end] if t_end > 0 else [0.0]
    return count_trajectory(D, times, n_max, eps_trunc, ctl)[-1]


def coherence_magnitude(D: float, omega: float, p_diag: float) -> complex:
    """Adjacent-count coherence sigma^(n-1,n) = i (D / Omega) sigma^(n-1,n-1)."""
    if omega == 0:
        raise ZeroDivisionError("omega must be nonzero")
    return 1j * (D / omega) * p_diag


def bayes_update(D: float, obs: ObservationRecord, t: float, n_max: int | None = None,
                 eps_trunc: float = EPS_TRUNC, ctl: IntegrationControl | None = None
                 ) -> CountDistribution:
    """Count distribution at t given that N1 electrons were counted at t1.

    The rate equation is restarted from P_n(t1) = delta_{n,N1}; the exact
    answer is a Poisson law of mean D (t - t1) shifted by N1.
    """
    if t <= obs.t1:
        raise InvalidObservation(f"t={t} must exceed the readout time t1={obs.t1}")
    dt = t - obs.t1
    if D * dt < 10:
        warnings.warn(
            f"D (t - t1) = {D * dt:.3g}: the Gaussian companion form is unreliable here",
            stacklevel=2,
        )
    fresh = evolve_counts(D, dt, None if n_max is None else n_max - obs.n1,
                          eps_trunc=eps_trunc, ctl=ctl)
    p = np.concatenate([np.zeros(obs.n1), fresh.probabilities])
    return CountDistribution(p, float(t))


def bayes_gaussian(D: float, obs: ObservationRecord, t: float, n) -> np.ndarray | float:
    """Gaussian approximation of the conditioned distribution, with dN = N1 - D t1."""
    if t <= obs.t1:
        raise InvalidObservation(f"t={t} must exceed the readout time t1={obs.t1}")
    dN = obs.n1 - D * obs.t1
    var = D * (t - obs.t1)
    n = np.asarray(n, dtype=float)
    out = np.exp(-((D * t - n + dN) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    return float(out) if out.ndim == 0 else out
