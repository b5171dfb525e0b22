import json
import math

import numpy as np
import pytest

from zenosim.cavity import (
    ANTI_ZENO,
    CROSSOVER,
    ZENO,
    cavity_trace_tolerance,
    classify_regime,
    default_reservoir_grid,
    detuning_regime,
    effective_decay_rate,
    evolve_cavity,
    fitted_rate,
    short_time_survival,
    weak_damping,
    zeno_window,
)
from zenosim.core import InvalidGrid, InvalidParams, ModelParams
from zenosim.flat_decay import evolve_amplitudes_qd
from zenosim.integrator import discretize_flat_continuum, discretize_lorentzian_continuum

DETUNED = ModelParams(omega_alpha=1.0, gamma1=1.0, e0=0.0, e1=10.0)


def test_effective_rate_values():
    assert effective_decay_rate(1.0, 1.0, 0.0, 10.0) == pytest.approx(4 / 401)
    assert effective_decay_rate(1.0, 1.0, 10.0, 10.0) == pytest.approx(44 / 521)
    assert effective_decay_rate(1.0, 2.0, 0.0, 0.0) == pytest.approx(4 / 2)
    assert effective_decay_rate(1.0, 1.0, 1e9, 10.0) < 1e-8
    with pytest.raises(ValueError):
        effective_decay_rate(1.0, 0.0, 0.0, 1.0)


def test_effective_rate_maximum_location():
    gd = np.linspace(0, 60, 6001)
    rates = [effective_decay_rate(1.0, 1.0, g, 10.0) for g in gd]
    assert 1.0 + gd[int(np.argmax(rates))] == pytest.approx(20.0, abs=0.01)


def test_short_time_law():
    assert short_time_survival(1.0, 0.0) == 1.0
    assert short_time_survival(1.0, 0.1) == pytest.approx(0.99)
    with pytest.warns(UserWarning):
        short_time_survival(1.0, 1.0)


def test_decoupled_dot():
    p = ModelParams(omega_alpha=0.0, gamma1=1.0, e1=2.0)
    tr = evolve_cavity(p, None, 3.0, np.linspace(0, 10, 11))
    assert np.all(tr.observables["survival"] == 1.0)
    assert np.all(tr.observables["cavity"] == 0.0)


def test_quadratic_onset():
    t = np.linspace(0, 0.05, 51)
    s = evolve_cavity(DETUNED, None, 0.0, t).observables["survival"]
    c = np.polynomial.polynomial.polyfit(t, s, 4)
    assert c[2] == pytest.approx(-1.0, rel=0.02)
    assert abs(c[1]) < 1e-3


def test_full_grid_matches_closed_block():
    p = ModelParams(omega_alpha=1.0, gamma1=2.0, e1=1.0)
    grid = discretize_flat_continuum(2.0, 0.5, 60.0, 601)
    t = np.linspace(0, 5, 26)
    for gd in (0.0, 3.0):
        full = evolve_cavity(p, grid, gd, t)
        closed = evolve_cavity(p, None, gd, t)
        assert np.max(np.abs(full.observables["survival"] - closed.observables["survival"])) < 1e-8
        eps = cavity_trace_tolerance(p, grid, gd)
        for state in full.states:
            state.check(eps)
            assert len(state.sigma_1alpha) == len(grid)
        for state in closed.states:
            state.check(1e-6)


def test_grid_width_must_match_gamma1():
    with pytest.raises(InvalidGrid):
        evolve_cavity(DETUNED, discretize_flat_continuum(3.0, 5.0, 50.0, 101), 0.0, [0.0, 1.0])
    with pytest.raises(InvalidParams):
        evolve_cavity(DETUNED.with_(gamma1=0.0), None, 0.0, [0.0, 1.0])
    with pytest.raises(InvalidParams):
        evolve_cavity(DETUNED, None, -1.0, [0.0, 1.0])


def test_default_reservoir_grid_covers_both_levels():
    g = default_reservoir_grid(DETUNED, 10.0, 401)
    assert g.energies[0] < 0.0 - 200 and g.energies[-1] > 10.0 + 200
    assert g.width_at(10.0) == pytest.approx(1.0)


def test_lorentzian_grid_reproduces_cavity_mapping():
    # direct simulation of a dot coupled to a Lorentzian continuum
    p = ModelParams(omega_alpha=1.0, gamma1=2.0, e0=0.0, e1=1.0)
    grid = discretize_lorentzian_continuum(1.0, 1.0, 2.0, 200.0, 8001)
    t = np.linspace(0, 5, 26)
    direct = evolve_amplitudes_qd(p, grid, t).observables["survival"]
    mapped = evolve_cavity(p, None, 0.0, t).observables["survival"]
    assert np.max(np.abs(direct - mapped)) < 5e-3


def test_aligned_rate_strong_cavity_damping():
    p = ModelParams(omega_alpha=1.0, gamma1=20.0)
    assert fitted_rate(p, 0.0).rate == pytest.approx(4 / 20, rel=0.05)


def test_fitted_rate_maximum_location():
    gds = [13.0, 16.0, 19.0, 22.0, 25.0]
    rates = [fitted_rate(DETUNED, g).rate for g in gds]
    assert gds[int(np.argmax(rates))] == 19.0


def test_detuned_is_anti_zeno_with_zeno_window():
    r = classify_regime(DETUNED, 10.0)
    assert r.classification == ANTI_ZENO
    assert r.rate_ratio == pytest.approx(44 / 521 / (4 / 401), rel=0.10)
    assert 0 < r.t_star < 1.0
    assert r.detuning_regime == "intermediate"
    t = np.linspace(0, 0.999 * r.t_star, 50)
    meas = evolve_cavity(DETUNED, None, 10.0, t).observables["survival"]
    bare = evolve_cavity(DETUNED, None, 0.0, t).observables["survival"]
    assert np.all(meas >= bare)
    later = np.linspace(0, 1.001 * r.t_star, 3)
    gap = np.diff([evolve_cavity(DETUNED, None, g, later).observables["survival"][-1]
                   for g in (0.0, 10.0)])
    assert gap[0] < 0


def test_aligned_measurement_is_zeno():
    p = ModelParams(omega_alpha=1.0, gamma1=2.0)
    r = classify_regime(p, 5.0)
    assert r.classification == ZENO
    assert r.rate_ratio < 1
    assert r.t_star > 0


def test_unmeasured_report():
    r = classify_regime(DETUNED, 0.0)
    assert r.classification == CROSSOVER
    assert r.rate_ratio == 1.0
    assert math.isinf(r.t_star)
    d = json.loads(r.to_json())
    assert d["t_star"] is None
    assert d["params"]["e1"] == 10.0


def test_zeno_window_without_measurement():
    assert zeno_window(DETUNED, 0.0, 10.0) == math.inf


def test_detuning_regime_thresholds():
    assert detuning_regime(0.0, 1.0) == "aligned"
    assert detuning_regime(1.0, 1.0) == "intermediate"
    assert detuning_regime(10.0, 1.0) == "misaligned"


def test_weak_damping_set():
    assert weak_damping(DETUNED, 0.0)
    assert not weak_damping(DETUNED, 10.0)
    assert not weak_damping(DETUNED.with_(e1=0.0), 0.0)
