"""Cross-checks of the closed forms against the RK4 integrator."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .analytic import (
    DegenerateSpectrum,
    asymptotic_observables,
    exp_m1,
    free_evolution,
    frobenius_covariants,
    magnus_m1,
    sylvester_eigens,
)
from .dynamics import propagate, propagator
from .model import (
    ModulationPulse,
    SystemConfig,
    TwoQubitPreparation,
    ValidityWarning,
    design_pulse,
    pulse_area_u,
    pulse_lambda,
)

TOLERANCES = {
    "sylvester_vs_ode": 1e-8,
    "covariant_completeness": 1e-10,
    "free_evolution_vs_ode": 1e-8,
    "asymptotic_agreement": 1e-2,
}

KD_GRID = (math.pi / 3, math.pi / 2, math.pi, 2 * math.pi)
F_GRID = (0.0, 0.02, 0.05)


def constant_pulse(f: float, t_gamma: float) -> ModulationPulse:
    if f == 0:
        return ModulationPulse.zero()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return ModulationPulse.rectangular(f, 0.0, t_gamma)


def sylvester_vs_ode(dt_gamma: float = 1e-3, t_gamma: float = 20.0, kds=KD_GRID, fs=F_GRID) -> float:
    """Max entry deviation between e^{M1} and the RK4 propagator for constant f."""
    worst = 0.0
    for kd in kds:
        for f in fs:
            pulse = constant_pulse(f, t_gamma)
            exact = exp_m1(magnus_m1(pulse, t_gamma, kd))
            ode = propagator(pulse, SystemConfig(kd=kd, dt_gamma=dt_gamma), t_gamma)
            worst = max(worst, float(np.abs(exact - ode).max()))
    return worst


def covariant_defects(mag) -> dict[str, float]:
    b = frobenius_covariants(mag, sylvester_eigens(mag))
    eye = np.eye(3)
    return {
        "completeness": float(np.abs(b[0] + b[1] + b[2] - eye).max()),
        "orthogonality": max(float(np.abs(b[i] @ b[j]).max()) for i in range(3) for j in range(3) if i != j),
        "idempotency": max(float(np.abs(bi @ bi - bi).max()) for bi in b),
    }


def covariant_completeness(t_gamma: float = 20.0, kds=KD_GRID, fs=F_GRID) -> float:
    """Worst covariant identity defect over the non-degenerate grid points."""
    worst = 0.0
    for kd in kds:
        for f in fs:
            mag = magnus_m1(constant_pulse(f, t_gamma), t_gamma, kd)
            try:
                worst = max(worst, *covariant_defects(mag).values())
            except DegenerateSpectrum:
                continue
    return worst


def free_evolution_vs_ode(dt_gamma: float = 1e-3, t_gamma: float = 20.0) -> float:
    worst = 0.0
    config = SystemConfig(dt_gamma=dt_gamma)
    for a1_sq, dphi in [(1.0, 0.0), (0.5, 0.0), (0.5, math.pi / 2), (0.3, -2.0)]:
        prep = TwoQubitPreparation.from_population(a1_sq, dphi)
        traj = propagate(prep, ModulationPulse.zero(), config, t_gamma, sample_every=100)
        for t, b in zip(traj.t_gamma, traj.amplitudes):
            ref = free_evolution(prep, t).as_array()
            worst = max(worst, float(np.abs(b - ref).max()))
    return worst


def asymptotic_agreement(
    dt_gamma: float = 1e-3,
    t_start: float = 10.0,
    duration: float = 141.0,
    settle: float = 5.0,
    a1_sq_grid=(0.2, 0.5, 0.8),
    dphi_grid=(-0.75 * math.pi, -0.4 * math.pi, 0.0, 0.4 * math.pi, math.pi),
    u_grid=(math.pi / 2, math.pi),
) -> float:
    """Worst |ODE - closed form| over (d, S, p2) at readout, kd = 2 pi."""
    config = SystemConfig(dt_gamma=dt_gamma)
    t_read = t_start + duration + settle
    worst = 0.0
    for u in u_grid:
        pulse = design_pulse(u, t_start, duration)
        prop = propagator(pulse, config, t_read)
        lam = pulse_lambda(pulse, t_read)
        area = pulse_area_u(pulse, t_read)
        for a1_sq in a1_sq_grid:
            for dphi in dphi_grid:
                prep = TwoQubitPreparation.from_population(a1_sq, dphi)
                p1, p2, p3 = np.abs(prop @ prep.initial_amplitudes().as_array()) ** 2
                d, s, q2 = asymptotic_observables(prep, area, lam)
                worst = max(worst, abs(p1 - p3 - d), abs(p1 + p3 - s), abs(p2 - q2))
    return worst


def run_all(dt_gamma: float = 1e-3) -> dict:
    values = {
        "sylvester_vs_ode": sylvester_vs_ode(dt_gamma),
        "covariant_completeness": covariant_completeness(),
        "free_evolution_vs_ode": free_evolution_vs_ode(dt_gamma),
        "asymptotic_agreement": asymptotic_agreement(dt_gamma),
    }
    checks = {
        name: {"max_deviation": v, "tolerance": TOLERANCES[name], "passed": bool(v <= TOLERANCES[name])}
        for name, v in values.items()
    }
    return {"checks": checks, "passed": all(c["passed"] for c in checks.values())}
