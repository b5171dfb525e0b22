import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zenosim.analysis import FitFailure, fit_decay_rate, fwhm, richardson
from zenosim.core import ContinuumGrid, InvalidGrid, InvalidParams, ModelParams, TruncationLeak
from zenosim.detector import poisson_counts
from zenosim.flat_decay import (
    InvalidStep,
    band_extrapolated_current,
    band_loss,
    block_size,
    detector_current,
    evolve_amplitudes_qd,
    evolve_bloch,
    evolve_n_resolved,
    line_shape,
    line_shape_from_state,
    lorentzian,
    occupation_alpha_analytic,
    pack_traced,
    projection_limit,
    repeated_projection_survival,
    steady_time,
    trace_over_counts,
    trace_tolerance,
    unpack_traced,
)
from zenosim.integrator import discretize_flat_continuum

SMALL = discretize_flat_continuum(1.0, 0.0, 10.0, 201)


@pytest.mark.parametrize("gamma_d", [0.0, 10.0])
def test_bloch_survival_is_exponential(gamma_d):
    tr = evolve_bloch(ModelParams(), SMALL, gamma_d, [0.0, 1.0])
    assert tr.observables["survival"][-1] == pytest.approx(math.exp(-1), rel=1e-8)


def test_decoupled_dot_stays():
    grid = discretize_flat_continuum(0.0, 0.0, 10.0, 21)
    tr = evolve_bloch(ModelParams(gamma0=0.0), grid, 2.0, np.linspace(0, 5, 6))
    assert np.all(tr.observables["survival"] == 1.0)


def test_bloch_trace_within_declared_tolerance():
    p = ModelParams()
    for gd in (0.0, 2.0):
        tr = evolve_bloch(p, SMALL, gd, np.linspace(0, 10, 41))
        eps = trace_tolerance(SMALL, 0.0, 1.0, gd)
        for state in tr.states:
            state.check(eps)


def test_gamma0_must_match_grid():
    with pytest.raises(InvalidGrid):
        evolve_bloch(ModelParams(gamma0=2.0), SMALL, 0.0, [0.0, 1.0])
    with pytest.raises(InvalidParams):
        evolve_bloch(ModelParams(), SMALL, -1.0, [0.0, 1.0])


def test_unmeasured_populations_match_closed_form():
    p = ModelParams()
    grid = discretize_flat_continuum(1.0, 0.0, 40.0, 1601)
    t = 3.0
    s = evolve_bloch(p, grid, 0.0, [0.0, t]).state(1)
    exact = occupation_alpha_analytic(p, grid.energies, t, omega=grid.couplings)
    centre = np.abs(grid.energies) < 5
    assert s.sigma_alpha_alpha[centre] == pytest.approx(exact[centre], rel=1e-6, abs=1e-12)


def test_pack_roundtrip():
    s = evolve_bloch(ModelParams(), SMALL, 1.0, [0.0, 0.7]).state(1)
    y = pack_traced(s)
    assert len(y) == block_size(len(SMALL))
    back = unpack_traced(y)
    assert back.sigma_00 == s.sigma_00
    assert np.array_equal(back.sigma_alpha_0, s.sigma_alpha_0)


def test_n_resolved_traces_to_bloch():
    p = ModelParams.from_detector_rates(2.0, 0.5)
    grid = discretize_flat_continuum(1.0, 0.0, 8.0, 81)
    times = np.linspace(0, 3, 7)
    res = evolve_n_resolved(p, grid, times)
    bloch = evolve_bloch(p, grid, 0.5, times)
    summed = trace_over_counts(res, len(grid))
    assert np.max(np.abs(summed - bloch.ys)) < 1e-8
    assert res.observables["survival"] == pytest.approx(np.exp(-times), rel=1e-8)
    res.state(len(times) - 1).check(trace_tolerance(grid, 0.0, 1.0, 0.5))


def test_unmodulated_detector_is_poisson():
    p = ModelParams.from_detector_rates(1.5, 1.5)
    grid = discretize_flat_continuum(1.0, 0.0, 5.0, 41)
    res = evolve_n_resolved(p, grid, [0.0, 2.0])
    probs = res.observables["count_probabilities"][-1]
    probs = probs / probs.sum()
    assert probs == pytest.approx(poisson_counts(1.5, 2.0, np.arange(len(probs))), abs=1e-8)


def test_frozen_dot_counts_at_reduced_rate():
    p = ModelParams.from_detector_rates(2.0, 0.5, gamma0=0.0)
    grid = discretize_flat_continuum(0.0, 0.0, 5.0, 11)
    res = evolve_n_resolved(p, grid, [0.0, 3.0])
    probs = res.observables["count_probabilities"][-1]
    assert probs == pytest.approx(poisson_counts(0.5, 3.0, np.arange(len(probs))), abs=1e-8)
    assert res.observables["mean_current"][-1] == pytest.approx(0.5, rel=1e-6)


def test_n_resolved_leak():
    p = ModelParams.from_detector_rates(2.0, 0.5)
    with pytest.raises(TruncationLeak):
        evolve_n_resolved(p, discretize_flat_continuum(1.0, 0.0, 5.0, 11), [0.0, 5.0], n_max=4)


def test_current_formula():
    assert detector_current(2.0, 0.5, 1.0) == 0.5
    assert detector_current(2.0, 0.5, 0.0) == 2.0
    e = math.exp(-1)
    assert detector_current(2.0, 0.5, e) == pytest.approx(0.5 * e + 2.0 * (1 - e))
    with pytest.raises(ValueError):
        detector_current(1.0, 0.5, 1.5)


def test_amplitude_oracle_unitary_and_two_level():
    p = ModelParams()
    tr = evolve_amplitudes_qd(p, SMALL, np.linspace(0, 5, 11))
    assert tr.observables["norm"] == pytest.approx(1.0, abs=1e-7)
    one = ContinuumGrid([0.0], [0.5], [1.0])
    rabi = evolve_amplitudes_qd(p, one, np.linspace(0, 2 * math.pi, 9))
    assert rabi.observables["survival"] == pytest.approx(np.cos(0.5 * rabi.times) ** 2, abs=1e-7)
    with pytest.raises(InvalidParams):
        evolve_amplitudes_qd(ModelParams(omega_pc=1.0, delta_omega=0.5), SMALL, [0.0, 1.0])


def test_amplitude_oracle_on_wide_band():
    # the finite band shapes the early decay; a wide band recovers the exponential
    grid = discretize_flat_continuum(1.0, 0.0, 200.0, 8001)
    t = np.linspace(0, 5, 51)
    tr = evolve_amplitudes_qd(ModelParams(), grid, t)
    assert np.max(np.abs(tr.observables["survival"] - np.exp(-t))) < 0.01


def test_line_shape_closed_form():
    e = np.linspace(-10, 10, 2001)
    ls = line_shape(1.0, 0.0, 0.0, e)
    assert ls.density.max() == pytest.approx(2 / math.pi, rel=1e-9)
    assert ls.fwhm == pytest.approx(1.0, rel=1e-3)
    assert line_shape(1.0, 2.0, 0.0, e).fwhm == pytest.approx(3.0, rel=1e-3)
    assert ls.density == pytest.approx(ls.density[::-1])
    wide = line_shape(1.0, 0.0, 0.0, np.linspace(-2000, 2000, 400001))
    assert wide.integral() == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        line_shape(0.0, 1.0, 0.0, e)


@pytest.mark.parametrize("gamma_d", [0.0, 1.0])
def test_numeric_line_width(gamma_d):
    p = ModelParams()
    grid = discretize_flat_continuum(1.0, 0.0, 20.0, 2001)
    s = evolve_bloch(p, grid, gamma_d, [0.0, steady_time(1.0)]).state(1)
    ls = line_shape_from_state(s, grid)
    assert ls.fwhm == pytest.approx(1.0 + gamma_d, rel=0.05)
    assert ls.peak_position == pytest.approx(0.0, abs=0.05)
    assert np.all(ls.density >= 0)


def test_band_loss():
    wide = discretize_flat_continuum(1.0, 0.0, 1000.0, 101)
    narrow = discretize_flat_continuum(1.0, 0.0, 10.0, 101)
    assert band_loss(wide, 0.0, 1.0) < band_loss(narrow, 0.0, 1.0) < 0.05
    tapered = discretize_flat_continuum(1.0, 0.0, 10.0, 101, taper=0.5)
    assert band_loss(tapered, 0.0, 1.0) > band_loss(narrow, 0.0, 1.0)


def test_projection_limit():
    vals = [projection_limit(1.0, dt, 1.0) for dt in (0.1, 0.01, 0.001)]
    assert vals[0] < vals[1] < vals[2] < 1.0
    assert 1 - vals[2] == pytest.approx(1e-3, rel=1e-3)
    assert repeated_projection_survival(1.0, 0.1, 10) == pytest.approx(vals[0])
    with pytest.raises(InvalidStep):
        projection_limit(1.0, 1.0, 1.0)


@given(st.floats(0.1, 5.0), st.floats(1e-4, 0.3))
def test_projection_between_zero_and_one(a, dt):
    if a * dt * dt >= 1:
        return
    s = projection_limit(a, dt, 1.0)
    assert 0 < s < 1


def test_fit_decay_rate():
    t = np.linspace(0, 5, 101)
    fit = fit_decay_rate(t, 2 * np.exp(-0.7 * t), 1.0, 5.0)
    assert fit.rate == pytest.approx(0.7)
    assert fit.r2 == pytest.approx(1.0)
    with pytest.raises(FitFailure):
        fit_decay_rate(t, 1 + t**3, 1.0, 5.0)


def test_fit_through_envelope():
    t = np.linspace(0, 20, 2001)
    osc = np.exp(-0.3 * t) * np.cos(4 * t) ** 2
    fit = fit_decay_rate(t, osc, 2.0, 20.0)
    assert fit.envelope
    assert fit.rate == pytest.approx(0.3, rel=1e-3)
    with pytest.raises(FitFailure):
        fit_decay_rate(t, osc, 19.0, 20.0)


def test_fwhm_and_richardson():
    x = np.linspace(-5, 5, 10001)
    assert fwhm(x, lorentzian(x, 0.0, 2.0)) == pytest.approx(2.0, rel=1e-5)
    assert richardson(1.0 + 0.4, 1.0 + 0.2) == pytest.approx(1.0)
    assert richardson(1.0 + 0.16, 1.0 + 0.04, order=2) == pytest.approx(1.0)


def test_band_extrapolated_current_tracks_closed_form():
    p = ModelParams.from_detector_rates(1.0, 0.25)
    t = np.union1d(np.linspace(0.0, 0.01, 21), np.linspace(0.0, 1.0, 11))
    current = band_extrapolated_current(p, t, half_bandwidth=50.0)
    expected = detector_current(1.0, 0.25, np.exp(-t))
    # early peak ~3 / (16 W), late error far smaller
    assert np.max(np.abs(current / expected - 1)) < 0.006
    assert np.max(np.abs(current / expected - 1)[t >= 0.5]) < 1e-3
    assert band_extrapolated_current(p, [0.0]) == pytest.approx([0.25])
