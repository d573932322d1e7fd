"""
Two-pulse phase tomography of the edge-qubit pair.

A pi pulse on the central qubit maps the population difference onto the
initial imbalance, which fixes |beta_1(0)| and |beta_3(0)|. A pi/2 pulse
exposes sin(phi3 - phi1) in the difference, while the population sum carries
cos(phi1 - phi3). Together they pin the relative phase on the full circle.

Phase convention: reported phases are phi1 - phi3.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .dynamics import propagator
from .model import (
    ModulationPulse,
    ReducedDensityMatrix,
    SystemConfig,
    TwoQubitPreparation,
    design_pulse,
    density_from_preparation,
    pulse_lambda,
    wrap_phase,
)

PulseKind = Literal["pi", "half_pi", "none"]
PULSE_AREAS = {"pi": math.pi, "half_pi": math.pi / 2, "none": 0.0}

# Coherence is unresolvable below this |b1||b3| estimate. The pi-pulse
# contraction e^{-Lambda} alone leaves a basis state at about sqrt(Lambda/2) ~ 0.1.
EPS_PROD = 0.15
TRIG_SLACK = 0.05


@dataclass(frozen=True)
class ProtocolParams:
    kd: float = 2 * math.pi
    t_start_gamma: float = 10.0
    duration_gamma: float = 141.0
    settle_gamma: float = 5.0
    dt_gamma: float = 1e-3
    eps_prod: float = EPS_PROD
    lambda_correct: bool = False

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(gamma=1.0, kd=self.kd, dt_gamma=self.dt_gamma)

    @property
    def t_readout_gamma(self) -> float:
        return self.t_start_gamma + self.duration_gamma + self.settle_gamma

    def pulse(self, kind: PulseKind) -> ModulationPulse:
        if kind == "none":
            return ModulationPulse.zero()
        return design_pulse(PULSE_AREAS[kind], self.t_start_gamma, self.duration_gamma)


@dataclass(frozen=True)
class MeasurementRecord:
    pulse_kind: str
    p1: float
    p3: float
    p2: float
    shots: int | None
    t_readout_gamma: float

    def __post_init__(self):
        if self.p1 < 0 or self.p3 < 0:
            raise ValueError("populations must be non-negative")
        if self.p1 + self.p3 > 1 + 1e-9:
            raise ValueError("p1 + p3 exceeds 1")

    @property
    def d(self) -> float:
        return self.p1 - self.p3

    @property
    def S(self) -> float:
        return self.p1 + self.p3


class PhaseEstimate(NamedTuple):
    sin_est: float
    cos_est: float
    phi_est: float
    flags: dict


@dataclass(frozen=True)
class ReconstructionReport:
    a1_est: float
    a3_est: float
    phi_est: float
    sin_est: float
    cos_est: float
    rho_est: ReducedDensityMatrix
    flags: dict = field(default_factory=dict)
    record_pi: MeasurementRecord | None = None
    record_half_pi: MeasurementRecord | None = None

    def __post_init__(self):
        if abs(self.a1_est**2 + self.a3_est**2 - 1) > 1e-9:
            raise ValueError("estimated amplitudes are not normalised")

    def to_dict(self) -> dict:
        rho = self.rho_est
        return {
            "phase_convention": "phi1 - phi3",
            "a1_est": self.a1_est,
            "a3_est": self.a3_est,
            "a1_sq_est": self.a1_est**2,
            "phi_est": self.phi_est,
            "sin_est": self.sin_est,
            "cos_est": self.cos_est,
            "rho_est": {
                "p11": rho.p11,
                "p33": rho.p33,
                "rho13_re": rho.rho13.real,
                "rho13_im": rho.rho13.imag,
            },
            "phase_indeterminate": bool(self.flags.get("phase_indeterminate", False)),
            "trig_out_of_range": bool(self.flags.get("trig_out_of_range", False)),
            "records": {
                name: None if rec is None else dict(asdict(rec), d=rec.d, S=rec.S)
                for name, rec in (("pi", self.record_pi), ("half_pi", self.record_half_pi))
            },
        }


def measure(
    prep: TwoQubitPreparation,
    pulse_kind: PulseKind,
    params: ProtocolParams = ProtocolParams(),
    shots: int | None = None,
    rng_seed=None,
) -> MeasurementRecord:
    """
    Populations after the designated pulse, read out ``settle_gamma`` after it ends.

    With ``shots`` the populations are replaced by the outcome frequencies of
    ``shots`` single-excitation readouts (qubit 1, 2, 3 or none).
    """
    if pulse_kind not in PULSE_AREAS:
        raise ValueError(f"unknown pulse kind {pulse_kind!r}")
    if shots is not None and shots <= 0:
        raise ValueError("shots must be positive")
    t_read = params.t_readout_gamma
    p = propagator(params.pulse(pulse_kind), params.system, t_read)
    b = p @ prep.initial_amplitudes().as_array()
    p1, p2, p3 = (float(x) for x in np.abs(b) ** 2)
    if shots is not None:
        rng = np.random.default_rng(rng_seed)
        # each shot finds the excitation on one qubit or lost to the waveguide
        lost = max(0.0, 1.0 - p1 - p2 - p3)
        probs = np.array([p1, p2, p3, lost]) / (p1 + p2 + p3 + lost)
        p1, p2, p3, _ = (float(k) / shots for k in rng.multinomial(shots, probs))
    return MeasurementRecord(pulse_kind, p1, p3, p2, shots, t_read)


def estimate_populations(rec_pi: MeasurementRecord) -> tuple[float, float]:
    if rec_pi.pulse_kind != "pi":
        raise ValueError("population estimate needs a pi-pulse record")
    x = 3.0 * rec_pi.d
    a1 = math.sqrt(0.5 * min(max(1.0 - x, 0.0), 2.0))
    a3 = math.sqrt(0.5 * min(max(1.0 + x, 0.0), 2.0))
    return a1, a3


def estimate_phase(
    rec_half: MeasurementRecord,
    a1_est: float,
    a3_est: float,
    eps_prod: float = EPS_PROD,
    lambda_correct: bool = False,
    lam: float = 0.0,
) -> PhaseEstimate:
    """
    sin and cos of the relative phase from a pi/2-pulse record.

    ``sin_est`` is the raw estimate of sin(phi3 - phi1) and ``cos_est`` that of
    cos(phi1 - phi3); ``phi_est`` is returned as phi1 - phi3.
    """
    if rec_half.pulse_kind != "half_pi":
        raise ValueError("phase estimate needs a pi/2-pulse record")
    prod = a1_est * a3_est
    flags = {"phase_indeterminate": False, "trig_out_of_range": False}
    if prod < eps_prod:
        flags["phase_indeterminate"] = True
        return PhaseEstimate(0.0, 0.0, 0.0, flags)
    d = rec_half.d * (math.exp(lam) if lambda_correct else 1.0)
    sin_raw = 1.5 * d / prod
    cos_raw = -(rec_half.S - 5.0 / 9.0) * 9.0 / (8.0 * prod)
    if max(abs(sin_raw), abs(cos_raw)) > 1 + TRIG_SLACK:
        flags["trig_out_of_range"] = True
    sin_est = min(max(sin_raw, -1.0), 1.0)
    cos_est = min(max(cos_raw, -1.0), 1.0)
    phi = wrap_phase(-math.atan2(sin_est, cos_est))
    return PhaseEstimate(sin_est, cos_est, phi, flags)


def _seeds(seed, n):
    if seed is None:
        return [None] * n
    return np.random.SeedSequence(seed).spawn(n)


def reconstruct(
    prep: TwoQubitPreparation,
    params: ProtocolParams = ProtocolParams(),
    shots: int | None = None,
    seed=None,
) -> ReconstructionReport:
    """Run the pi then pi/2 measurement and rebuild the density matrix."""
    seed_pi, seed_half = _seeds(seed, 2)
    rec_pi = measure(prep, "pi", params, shots, seed_pi)
    a1, a3 = estimate_populations(rec_pi)
    # renormalise the clamped estimates
    norm = math.hypot(a1, a3)
    a1, a3 = a1 / norm, a3 / norm
    rec_half = measure(prep, "half_pi", params, shots, seed_half)
    lam = pulse_lambda(params.pulse("half_pi"), rec_half.t_readout_gamma)
    est = estimate_phase(rec_half, a1, a3, params.eps_prod, params.lambda_correct, lam)
    if est.flags["phase_indeterminate"]:
        rho = ReducedDensityMatrix(a1 * a1, 1.0 - a1 * a1, 0j)
    else:
        rho = density_from_preparation(TwoQubitPreparation(a1, a3, est.phi_est, 0.0))
    return ReconstructionReport(a1, a3, est.phi_est, est.sin_est, est.cos_est, rho, est.flags, rec_pi, rec_half)


def phase_error(phi_est: float, phi_true: float) -> float:
    """Absolute angular distance modulo 2 pi."""
    return abs(wrap_phase(phi_est - phi_true))
