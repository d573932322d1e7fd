import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import exact_piecewise, generator
from waveguide_tomo import dynamics
from waveguide_tomo.analytic import free_evolution
from waveguide_tomo.dynamics import (
    StepTooLarge,
    observables,
    propagate,
    propagate_amplitudes,
    propagator,
    rhs,
)
from waveguide_tomo.model import ModulationPulse, SystemConfig, ThreeQubitAmplitudes, TwoQubitPreparation, design_pulse

TWO_PI = 2 * math.pi
FIG3 = design_pulse(math.pi / 2, 10, 141)
FIG4 = design_pulse(math.pi, 10, 141)


def test_rhs_single_excitation():
    out = rhs(ThreeQubitAmplitudes(1, 0, 0), 0.0, TWO_PI, 1.0)
    np.testing.assert_allclose(out, [-0.5, -0.5, -0.5], atol=1e-15)


def test_rhs_dark_state_is_annihilated():
    dark = ThreeQubitAmplitudes(1 / math.sqrt(6), -2 / math.sqrt(6), 1 / math.sqrt(6))
    np.testing.assert_allclose(rhs(dark, 0.0, TWO_PI, 1.0), [0, 0, 0], atol=1e-16)


def test_rhs_detuned_centre():
    out = rhs(ThreeQubitAmplitudes(0, 1, 0), 0.05, TWO_PI, 1.0)
    np.testing.assert_allclose(out, [-0.5, -0.5 - 0.05j, -0.5], atol=1e-15)


@given(
    re=st.lists(st.floats(-1, 1), min_size=6, max_size=6),
    f=st.floats(-0.2, 0.2),
    kd=st.floats(0, 2 * math.pi),
)
def test_rhs_matches_matrix_form(re, f, kd):
    b = np.array(re[:3]) + 1j * np.array(re[3:])
    np.testing.assert_allclose(rhs(b, f, kd), generator(f, kd) @ b, atol=1e-12)


def test_free_decay_to_asymptotic_populations():
    traj = propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 20.0)
    np.testing.assert_allclose(traj.final.populations, (4 / 9, 1 / 9, 1 / 9), atol=2e-6)


def test_equal_amplitudes_stay_equal(equal_prep):
    prep = TwoQubitPreparation(1 / math.sqrt(2), 1 / math.sqrt(2), 0.3, 0.3)
    obs = observables(propagate(prep, ModulationPulse.zero(), SystemConfig(), 20.0, sample_every=50))
    np.testing.assert_allclose(obs.p1, obs.p3, atol=1e-12)


def test_fig3_difference(equal_prep):
    obs = observables(propagate(equal_prep, FIG3, SystemConfig(), 200.0))
    assert obs.d[-1] == pytest.approx(0.3154, abs=0.01)


def test_fig4_difference_vanishes(equal_prep):
    obs = observables(propagate(equal_prep, FIG4, SystemConfig(), 200.0))
    assert abs(obs.d[-1]) <= 5e-3


def test_observables_basis_sample():
    traj = propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 1.0)
    obs = observables(traj)
    assert (obs.p1[0], obs.p2[0], obs.p3[0], obs.d[0], obs.S[0]) == (1, 0, 0, 1, 1)
    far = observables(propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 30.0))
    assert far.d[-1] == pytest.approx(1 / 3 * far.d[0], abs=1e-9)


def test_matches_exact_exponential_oracle(equal_prep):
    """RK4 against chained matrix exponentials for the figure pulses."""
    b0 = equal_prep.initial_amplitudes().as_array()
    for pulse in (FIG3, FIG4, ModulationPulse.piecewise([3.3, 7.05, 40.0], [0.04, -0.03])):
        traj = propagate(equal_prep, pulse, SystemConfig(), 60.0)
        np.testing.assert_allclose(traj.final.as_array(), exact_piecewise(b0, pulse, TWO_PI, 60.0), atol=1e-10)


def test_tabulated_pulse_against_adaptive_solver():
    """Smooth pulse versus scipy's DOP853, an independent integrator."""
    ts = np.linspace(5.0, 45.0, 81)
    vals = 0.04 * np.sin(np.pi * (ts - 5.0) / 40.0) ** 2
    pulse = ModulationPulse.tabulated(ts, vals)
    kd = 1.1
    prep = TwoQubitPreparation(0.6, 0.8, 0.2, -1.0)
    b0 = prep.initial_amplitudes().as_array()

    def fun(t, y):
        return generator(pulse.value(t), kd) @ y

    ref = solve_ivp(fun, (0, 60.0), b0, method="DOP853", rtol=1e-12, atol=1e-13, max_step=0.05).y[:, -1]
    traj = propagate(prep, pulse, SystemConfig(kd=kd), 60.0)
    np.testing.assert_allclose(traj.final.as_array(), ref, atol=1e-8)


def test_free_evolution_pointwise():
    prep = TwoQubitPreparation.from_population(0.3, -2.0)
    traj = propagate(prep, ModulationPulse.zero(), SystemConfig(), 20.0, sample_every=10)
    ref = np.array([free_evolution(prep, t).as_array() for t in traj.t_gamma])
    np.testing.assert_allclose(traj.amplitudes, ref, atol=1e-8)


def test_difference_is_phase_independent():
    traces = []
    for dphi in (0.0, math.pi / 4, math.pi / 2, math.pi):
        prep = TwoQubitPreparation.from_population(0.7, dphi)
        traces.append(observables(propagate(prep, ModulationPulse.zero(), SystemConfig(), 20.0, sample_every=20)).d)
    for tr in traces[1:]:
        np.testing.assert_allclose(tr, traces[0], atol=1e-10, rtol=0)


@settings(max_examples=15, deadline=None)
@given(
    c_abs=st.floats(0, 1),
    c_arg=st.floats(-math.pi, math.pi),
    a1_sq=st.floats(0, 1),
    dphi=st.floats(-math.pi, math.pi),
)
def test_linearity(c_abs, c_arg, a1_sq, dphi):
    c = c_abs * np.exp(1j * c_arg)
    b0 = TwoQubitPreparation.from_population(a1_sq, dphi).initial_amplitudes().as_array()
    cfg = SystemConfig(dt_gamma=0.01)
    _, base = propagate_amplitudes(b0, FIG3, cfg, 160.0, sample_every=500)
    _, scaled = propagate_amplitudes(c * b0, FIG3, cfg, 160.0, sample_every=500)
    np.testing.assert_allclose(scaled, c * base, atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(a1_sq=st.floats(0, 1), dphi=st.floats(-math.pi, math.pi), kd=st.floats(0, 2 * math.pi), f=st.floats(-0.2, 0.2))
def test_dissipative(a1_sq, dphi, kd, f):
    prep = TwoQubitPreparation.from_population(a1_sq, dphi)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pulse = ModulationPulse.rectangular(f, 2.0, 30.0)
    traj = propagate(prep, pulse, SystemConfig(kd=kd, dt_gamma=0.005), 40.0, sample_every=10)
    norm = traj.total_population
    assert np.all(np.diff(norm) <= 1e-9)
    assert norm.max() <= 1 + 1e-9


def test_dark_state_stationary(equal_prep):
    for pulse in (FIG3, FIG4):
        traj = propagate(equal_prep, pulse, SystemConfig(), 211.0, sample_every=100)
        pops = np.abs(traj.amplitudes[traj.t_gamma >= 161.0]) ** 2
        assert np.ptp(pops, axis=0).max() <= 1e-6


def test_convergence_order(equal_prep):
    """Richardson: error ratio under step halving ~ 16."""
    steps = (0.01, 0.005, 0.0025)
    runs = [
        propagate(equal_prep, FIG3, SystemConfig(dt_gamma=h), 156.0, sample_every=round(0.04 / h)).amplitudes
        for h in steps
    ]
    e1 = np.abs(runs[0] - runs[1]).max()
    e2 = np.abs(runs[1] - runs[2]).max()
    assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.2)


def test_deterministic(equal_prep):
    a = propagate(equal_prep, FIG3, SystemConfig(), 160.0).amplitudes
    b = propagate(equal_prep, FIG3, SystemConfig(), 160.0).amplitudes
    assert np.array_equal(a, b)


def test_sampling_layout():
    traj = propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 1.0005, sample_every=100)
    assert traj.t_gamma[0] == 0.0 and traj.t_gamma[-1] == pytest.approx(1.0005)
    assert np.all(np.diff(traj.t_gamma) > 0)
    assert len(traj.samples) == len(traj)
    default = propagate(TwoQubitPreparation(1, 0), FIG3, SystemConfig(), 200.0)
    assert len(default) >= 1000


def test_propagator_consistent_with_trajectory(equal_prep):
    p = propagator(FIG3, SystemConfig(), 156.0)
    traj = propagate(equal_prep, FIG3, SystemConfig(), 156.0)
    np.testing.assert_allclose(p @ equal_prep.initial_amplitudes().as_array(), traj.final.as_array(), atol=1e-13)


def test_step_guard(monkeypatch):
    monkeypatch.setattr(dynamics, "MAX_STEP_PRODUCT", 0.005)
    with pytest.raises(StepTooLarge):
        propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(dt_gamma=0.01), 1.0)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 0.0)
    with pytest.raises(ValueError):
        propagate(TwoQubitPreparation(1, 0), ModulationPulse.zero(), SystemConfig(), 1.0, sample_every=0)
