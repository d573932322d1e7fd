import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from waveguide_tomo.analytic import (
    DegenerateSpectrum,
    asymptotic_observables,
    characteristic_residual,
    exp_m1,
    free_asymptotic_populations,
    free_evolution,
    frobenius_covariants,
    lambda1_asymptotic,
    magnus_m1,
    magnus_propagate,
    sylvester_eigens,
)
from waveguide_tomo.dynamics import propagate, propagator
from waveguide_tomo.model import ModulationPulse, SystemConfig, TwoQubitPreparation, design_pulse, pulse_area_u, pulse_lambda
from waveguide_tomo.validation import (
    KD_GRID,
    F_GRID,
    asymptotic_agreement,
    constant_pulse,
    covariant_completeness,
    covariant_defects,
    sylvester_vs_ode,
)

TWO_PI = 2 * math.pi
SQ = 1 / math.sqrt(2)


def test_free_evolution_examples():
    np.testing.assert_allclose(free_evolution(TwoQubitPreparation(1, 0), 0).as_array(), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(free_evolution(TwoQubitPreparation(1, 0), 60).as_array(), [2 / 3, -1 / 3, -1 / 3], atol=1e-15)
    late = free_evolution(TwoQubitPreparation(SQ, SQ), 60)
    assert late.b1 == pytest.approx(1 / (3 * math.sqrt(2)), abs=1e-15)
    assert abs(late.b1) ** 2 == pytest.approx(1 / 18, abs=1e-15)


def test_free_asymptotic_population_examples():
    np.testing.assert_allclose(free_asymptotic_populations(TwoQubitPreparation(1, 0)), (4 / 9, 1 / 9, 1 / 9), atol=1e-15)
    np.testing.assert_allclose(free_asymptotic_populations(TwoQubitPreparation(SQ, SQ, math.pi, 0)), (0.5, 0, 0.5), atol=1e-15)
    np.testing.assert_allclose(free_asymptotic_populations(TwoQubitPreparation(SQ, SQ)), (1 / 18, 2 / 9, 1 / 18), atol=1e-15)


@given(a1_sq=st.floats(0, 1), dphi=st.floats(-math.pi, math.pi))
def test_free_asymptotic_matches_limit_of_free_evolution(a1_sq, dphi):
    prep = TwoQubitPreparation.from_population(a1_sq, dphi)
    pops = free_evolution(prep, 60.0).populations
    np.testing.assert_allclose(pops, free_asymptotic_populations(prep), atol=1e-14)


def test_magnus_zero_pulse():
    mag = magnus_m1(ModulationPulse.zero(), 2.0, TWO_PI)
    np.testing.assert_allclose(mag.m, -np.ones((3, 3)), atol=1e-15)
    assert mag.area == 0.0


def test_sylvester_examples():
    eig = sylvester_eigens(magnus_m1(design_pulse(math.pi / 2, 10, 141), 160.0, TWO_PI))
    assert eig.lambda3 == 0
    t = 7.0
    eig = sylvester_eigens(magnus_m1(ModulationPulse.zero(), t, TWO_PI))
    assert sorted([eig.lambda1.real, eig.lambda2.real]) == pytest.approx([-1.5 * t, 0.0], abs=1e-12)
    assert eig.lambda3 == 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lambda3_vanishes_at_pi_multiples(n):
    eig = sylvester_eigens(magnus_m1(constant_pulse(0.03, 20.0), 20.0, n * math.pi))
    assert eig.lambda3 == 0


@settings(max_examples=60)
@given(kd=st.floats(0.1, 2 * math.pi), f=st.floats(-0.2, 0.2), t=st.floats(0.5, 200.0))
def test_eigenvalues_satisfy_cubic_and_trace(kd, f, t):
    mag = magnus_m1(constant_pulse(f, t), t, kd)
    lams = sylvester_eigens(mag).as_tuple()
    for lam in lams:
        assert abs(characteristic_residual(mag, lam)) < 1e-9
    assert sum(lams) == pytest.approx(np.trace(mag.m), abs=1e-9 * max(1.0, t))
    np.testing.assert_allclose(sorted(np.linalg.eigvals(mag.m), key=lambda z: (z.real, z.imag)),
                               sorted(lams, key=lambda z: (z.real, z.imag)), atol=1e-8 * max(1.0, t))


@pytest.mark.parametrize("kd", KD_GRID)
@pytest.mark.parametrize("f", F_GRID)
def test_covariant_identities(kd, f):
    mag = magnus_m1(constant_pulse(f, 20.0), 20.0, kd)
    try:
        defects = covariant_defects(mag)
    except DegenerateSpectrum:
        pytest.skip("degenerate spectrum at this grid point")
    assert max(defects.values()) <= 1e-10


def test_covariant_spectral_sum():
    mag = magnus_m1(constant_pulse(0.02, 20.0), 20.0, math.pi / 3)
    eig = sylvester_eigens(mag)
    b = frobenius_covariants(mag, eig)
    np.testing.assert_allclose(sum(l * bi for l, bi in zip(eig.as_tuple(), b)), mag.m, atol=1e-10)


def test_degenerate_spectrum_falls_back():
    # kd = 2 pi, f = 0: the symmetric-block zero root meets the antisymmetric one
    mag = magnus_m1(ModulationPulse.zero(), 20.0, TWO_PI)
    with pytest.raises(DegenerateSpectrum):
        frobenius_covariants(mag, sylvester_eigens(mag))
    np.testing.assert_allclose(exp_m1(mag), expm(mag.m), atol=1e-14)


@settings(max_examples=40)
@given(kd=st.floats(0, 2 * math.pi), f=st.floats(-0.2, 0.2), t=st.floats(0.5, 100.0))
def test_exp_m1_matches_scipy(kd, f, t):
    mag = magnus_m1(constant_pulse(f, t), t, kd)
    np.testing.assert_allclose(exp_m1(mag), expm(mag.m), atol=1e-9)


def test_exact_for_constant_modulation():
    assert sylvester_vs_ode(1e-3) <= 1e-8
    assert covariant_completeness() <= 1e-10


def test_magnus_close_to_ode_after_pulse(equal_prep):
    pulse = design_pulse(math.pi / 2, 10, 141)
    ode = propagate(equal_prep, pulse, SystemConfig(), 151.0).final.as_array()
    mag = magnus_propagate(equal_prep, pulse, 151.0, TWO_PI).as_array()
    # populations agree to ~1e-4; the dropped commutator terms leave ~3e-3 in the amplitudes
    np.testing.assert_allclose(np.abs(mag) ** 2, np.abs(ode) ** 2, atol=2e-3)
    assert np.abs(ode - mag).max() <= 5e-3


@pytest.mark.parametrize("ratio", [0.01, 0.03])
def test_lambda1_expansion(ratio):
    """Expansion error scales like (F/t)^3 against the exact smaller root."""
    t = 150.0
    F = -1j * ratio * t
    pulse = constant_pulse(ratio, t)
    mag = magnus_m1(pulse, t, TWO_PI)
    assert mag.F == pytest.approx(F)
    eig = sylvester_eigens(mag)
    exact = min(eig.lambda1, eig.lambda2, key=abs)
    assert abs(exact - lambda1_asymptotic(F, t)) <= 2.0 * t * ratio**3


def test_asymptotic_observables_examples():
    eq = TwoQubitPreparation(SQ, SQ, 0.0, 0.4 * math.pi)
    lam = (math.pi / 2) ** 2 / (3 * 151)
    d, s, p2 = asymptotic_observables(eq, math.pi / 2, lam)
    assert d == pytest.approx(math.sin(0.4 * math.pi) / 3 * math.exp(-lam), rel=1e-12)
    assert d == pytest.approx(0.3154, abs=5e-4)
    d, s, p2 = asymptotic_observables(eq, math.pi, 0.0)
    assert d == pytest.approx(0.0, abs=1e-15)
    assert s == pytest.approx(5 / 9 - 8 / 9 * 0.5 * math.cos(0.4 * math.pi), abs=1e-15)
    d, _, _ = asymptotic_observables(TwoQubitPreparation(1, 0), math.pi, 0.0)
    assert d == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        asymptotic_observables(eq, 1.0, -0.1)


@settings(max_examples=25)
@given(a1_sq=st.floats(0, 1), dphi=st.floats(-math.pi, math.pi), u=st.floats(0, 2 * math.pi))
def test_asymptotic_zero_area_matches_free_limit(a1_sq, dphi, u):
    prep = TwoQubitPreparation.from_population(a1_sq, dphi)
    d, s, p2 = asymptotic_observables(prep, 0.0, 0.0)
    p1, q2, p3 = free_asymptotic_populations(prep)
    assert d == pytest.approx(p1 - p3, abs=1e-14)
    assert s == pytest.approx(p1 + p3, abs=1e-14)
    assert p2 == pytest.approx(q2, abs=1e-14)
    d, s, p2 = asymptotic_observables(prep, u, 0.01)
    assert s + p2 <= 1 + 1e-12


def test_asymptotic_agreement_with_ode():
    assert asymptotic_agreement() <= 1e-2


def test_closed_form_population_difference_vs_ode():
    """Independent ODE-based check of the phase-term sign and the e^{-Lambda} factor."""
    prep = TwoQubitPreparation.from_population(0.35, 1.1)
    pulse = design_pulse(math.pi / 2, 10, 141)
    config = SystemConfig()
    b = propagator(pulse, config, 156.0) @ prep.initial_amplitudes().as_array()
    d_ode = abs(b[0]) ** 2 - abs(b[2]) ** 2
    d, _, _ = asymptotic_observables(prep, pulse_area_u(pulse, 156.0), pulse_lambda(pulse, 156.0))
    assert d == pytest.approx(d_ode, abs=5e-3)
