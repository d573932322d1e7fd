"""
Closed-form solutions: free evolution at kd = 2 pi, the first-order Magnus
propagator exponentiated with Sylvester's formula, and the long-time
observables used by the tomography protocol.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import phase_factor
from .model import ModulationPulse, ThreeQubitAmplitudes, TwoQubitPreparation, pulse_integral

DEGENERACY_RTOL = 1e-10


class DegenerateSpectrum(ArithmeticError):
    """Two Magnus eigenvalues coincide; Sylvester's formula does not apply."""


def _is_pi_multiple(kd: float) -> bool:
    return abs(kd - round(kd / math.pi) * math.pi) < 1e-12


@dataclass(frozen=True)
class MagnusMatrix:
    m: np.ndarray
    t_gamma: float
    kd: float
    area: float = 0.0  # integral of f over [0, t]

    @property
    def F(self) -> complex:
        return -1j * self.area

    @property
    def omega(self) -> complex:
        """Central diagonal entry 1 - 2F/(Gamma t) of the bracketed matrix."""
        return 1.0 - 2.0 * self.F / self.t_gamma


@dataclass(frozen=True)
class SylvesterEigens:
    lambda1: complex
    lambda2: complex
    lambda3: complex

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return self.lambda1, self.lambda2, self.lambda3


def free_evolution(prep: TwoQubitPreparation, t_gamma: float) -> ThreeQubitAmplitudes:
    """Unmodulated amplitudes at kd = 2 pi."""
    if t_gamma < 0:
        raise ValueError("t_gamma must be non-negative")
    b1, b3 = complex(prep.beta1), complex(prep.beta3)
    bright = (b1 + b3) / 3.0 * math.exp(-1.5 * t_gamma)
    return ThreeQubitAmplitudes(
        bright + (2 * b1 - b3) / 3.0,
        bright - (b1 + b3) / 3.0,
        bright + (2 * b3 - b1) / 3.0,
        t_gamma,
    )


def free_asymptotic_populations(prep: TwoQubitPreparation) -> tuple[float, float, float]:
    """Populations left once the bright mode has decayed (kd = 2 pi, f = 0)."""
    s1, s3 = prep.a1**2, prep.a3**2
    c = prep.a1 * prep.a3 * math.cos(prep.phi1 - prep.phi3)
    p1 = (4 * s1 + s3) / 9.0 - 4.0 / 9.0 * c
    p2 = (s1 + s3) / 9.0 + 2.0 / 9.0 * c
    p3 = (4 * s3 + s1) / 9.0 - 4.0 / 9.0 * c
    return p1, p2, p3


def magnus_m1(pulse: ModulationPulse, t_gamma: float, kd: float) -> MagnusMatrix:
    """First Magnus term: the time integral of the generator over [0, t]."""
    if not t_gamma > 0:
        raise ValueError("t_gamma must be positive")
    area = pulse_integral(pulse, t_gamma)
    e = phase_factor(kd)
    e2 = e * e
    omega = 1.0 + 2j * area / t_gamma
    bracket = np.array([[1, e, e2], [e, omega, e], [e2, e, 1]], dtype=complex)
    return MagnusMatrix(-0.5 * t_gamma * bracket, t_gamma, kd, area)


def characteristic_residual(mag: MagnusMatrix, lam: complex) -> complex:
    """
    Residual of the characteristic cubic in the normalised variable
    mu = lam / (-Gamma t / 2), i.e. for the bracketed matrix of ``magnus_m1``.
    """
    mu = lam / (-0.5 * mag.t_gamma)
    e2 = phase_factor(mag.kd) ** 2
    e4 = e2 * e2
    om = mag.omega
    return (1 - mu) ** 2 * (om - mu) + 2 * e4 - e4 * (om - mu) - 2 * e2 * (1 - mu)


def sylvester_eigens(mag: MagnusMatrix) -> SylvesterEigens:
    """
    Eigenvalues of M1 in closed form.

    lambda_1, lambda_2 come from the symmetric (1,0,1)/(0,1,0) block with the
    + and - branch of the square root; lambda_3 belongs to the antisymmetric
    vector (1,0,-1) and is exactly 0 when kd is a multiple of pi.
    """
    t = mag.t_gamma
    F = mag.F
    e = phase_factor(mag.kd)
    e2 = e * e
    root = 0.25 * e * np.sqrt((8 + e2) * t * t + 4 * F * F / e2 + 4 * F * t)
    centre = -0.5 * t * (1 + 0.5 * e2) + 0.5 * F
    lam1, lam2 = centre + root, centre - root
    # Vieta: refine the smaller root from the product to avoid cancellation
    prod = 0.25 * t * t * ((1 + e2) * mag.omega - 2 * e2)
    if abs(lam1) < abs(lam2) and lam2 != 0:
        lam1 = prod / lam2
    elif abs(lam2) < abs(lam1) and lam1 != 0:
        lam2 = prod / lam1
    if _is_pi_multiple(mag.kd):
        lam3 = 0j
    else:
        lam3 = 0.5 * t * (e2 - 1)
    return SylvesterEigens(complex(lam1), complex(lam2), complex(lam3))


def frobenius_covariants(mag: MagnusMatrix, eig: SylvesterEigens) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sylvester projectors; raises DegenerateSpectrum when two eigenvalues (nearly) coincide."""
    lams = eig.as_tuple()
    gap = min(abs(lams[0] - lams[1]), abs(lams[0] - lams[2]), abs(lams[1] - lams[2]))
    scale = max(1.0, float(np.linalg.norm(mag.m)))
    if gap < DEGENERACY_RTOL * scale:
        raise DegenerateSpectrum(f"eigenvalue gap {gap:.3g} below {DEGENERACY_RTOL:.0e} * {scale:.3g}")
    m = mag.m
    m2 = m @ m
    eye = np.eye(3, dtype=complex)
    l1, l2, l3 = eig.as_tuple()
    b1 = (m2 - (l2 + l3) * m + l2 * l3 * eye) / ((l1 - l2) * (l1 - l3))
    b2 = (m2 - (l1 + l3) * m + l1 * l3 * eye) / ((l2 - l1) * (l2 - l3))
    if l3 == 0:
        b3 = (m2 - (l1 + l2) * m) / (l1 * l2) + eye
    else:
        b3 = (m2 - (l1 + l2) * m + l1 * l2 * eye) / ((l3 - l1) * (l3 - l2))
    return b1, b2, b3


def exp_m1(mag: MagnusMatrix) -> np.ndarray:
    """
    e^{M1} via Sylvester's formula; falls back to scaling-and-squaring when
    the spectrum is (near) degenerate.
    """
    eig = sylvester_eigens(mag)
    try:
        b1, b2, b3 = frobenius_covariants(mag, eig)
    except DegenerateSpectrum:
        return expm(mag.m)
    l1, l2, l3 = eig.as_tuple()
    out = np.exp(l1) * b1 + np.exp(l2) * b2
    return out + (b3 if l3 == 0 else np.exp(l3) * b3)


def magnus_propagate(prep: TwoQubitPreparation, pulse: ModulationPulse, t_gamma: float, kd: float) -> ThreeQubitAmplitudes:
    p = exp_m1(magnus_m1(pulse, t_gamma, kd))
    b0 = prep.initial_amplitudes().as_array()
    return ThreeQubitAmplitudes.from_array(p @ b0, t_gamma)


def lambda1_asymptotic(F: complex, t_gamma: float) -> complex:
    """Leading expansion (2/3) F + (4/27) F^2/(Gamma t) of lambda_1 at kd = 2 pi."""
    return 2.0 / 3.0 * F + 4.0 / 27.0 * F * F / t_gamma


def asymptotic_observables(prep: TwoQubitPreparation, u: float, lam: float) -> tuple[float, float, float]:
    """
    Long-time (d, S, p2) at kd = 2 pi for pulse area ``u`` and leak exponent ``lam``.

    The phase term carries sin(phi3 - phi1).
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    a1, a3 = prep.a1, prep.a3
    c = a1 * a3 * math.cos(prep.phi1 - prep.phi3)
    s = a1 * a3 * math.sin(prep.phi3 - prep.phi1)
    shrink = math.exp(-lam)
    shrink2 = shrink * shrink
    d = shrink / 3.0 * ((a1 * a1 - a3 * a3) * math.cos(u) + 2 * s * math.sin(u))
    total = (shrink2 + 9) / 18.0 + c * (shrink2 - 9) / 9.0
    p2 = shrink2 / 9.0 * (1 + 2 * c)
    return d, total, p2
