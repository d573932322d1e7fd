"""
Domain types and pulse functionals.

All times are dimensionless (Gamma * t) and all frequencies are in units of
Gamma. ``SystemConfig.gamma`` is only used to convert at the boundary.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

AMPLITUDE_CAP = 0.2
AMPLITUDE_WARN = 0.05
MAX_DT_GAMMA = 0.01

SHAPES = ("rectangular", "piecewise", "tabulated")


class AmplitudeCapExceeded(ValueError):
    """Pulse detuning exceeds the hard cap |f| <= 0.2 Gamma."""


class ValidityWarning(UserWarning):
    """Pulse is outside the comfortable |f| << Gamma regime."""


def wrap_phase(phi: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    if w <= -math.pi:
        w += 2 * math.pi
    return w


@dataclass(frozen=True)
class SystemConfig:
    gamma: float = 1.0
    kd: float = 2 * math.pi
    dt_gamma: float = 1e-3

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.dt_gamma <= MAX_DT_GAMMA:
            raise ValueError(f"dt_gamma must lie in (0, {MAX_DT_GAMMA}], got {self.dt_gamma}")

    def to_gamma_time(self, t: float) -> float:
        return t * self.gamma

    def from_gamma_time(self, t_gamma: float) -> float:
        return t_gamma / self.gamma


@dataclass(frozen=True)
class ThreeQubitAmplitudes:
    """Rotating-frame amplitudes (beta_1, beta_2, beta_3) at time ``t_gamma``."""

    b1: complex
    b2: complex
    b3: complex
    t_gamma: float = 0.0

    def __post_init__(self):
        if self.norm_sq > 1 + 1e-9:
            raise ValueError(f"total population {self.norm_sq} exceeds 1")

    @classmethod
    def from_array(cls, b, t_gamma: float = 0.0) -> "ThreeQubitAmplitudes":
        b1, b2, b3 = (complex(x) for x in b)
        return cls(b1, b2, b3, float(t_gamma))

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3], dtype=complex)

    @property
    def populations(self) -> tuple[float, float, float]:
        return abs(self.b1) ** 2, abs(self.b2) ** 2, abs(self.b3) ** 2

    @property
    def norm_sq(self) -> float:
        return sum(self.populations)


@dataclass(frozen=True)
class TwoQubitPreparation:
    """
    Edge-qubit initial state |b1| e^{i phi1} |1> + |b3| e^{i phi3} |3>.

    The central qubit starts in its ground state. Phases are stored wrapped
    into (-pi, pi].
    """

    a1: float
    a3: float
    phi1: float = 0.0
    phi3: float = 0.0

    def __post_init__(self):
        for name in ("a1", "a3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.a1**2 + self.a3**2 - 1.0) > 1e-12:
            raise ValueError(f"a1^2 + a3^2 = {self.a1**2 + self.a3**2} is not 1")
        object.__setattr__(self, "phi1", wrap_phase(self.phi1))
        object.__setattr__(self, "phi3", wrap_phase(self.phi3))

    @classmethod
    def from_population(cls, a1_sq: float, dphi: float = 0.0) -> "TwoQubitPreparation":
        """Build from |b1(0)|^2 and the phase difference phi1 - phi3."""
        a1_sq = min(max(a1_sq, 0.0), 1.0)
        return cls(math.sqrt(a1_sq), math.sqrt(1.0 - a1_sq), dphi, 0.0)

    @property
    def dphi(self) -> float:
        """phi1 - phi3 in (-pi, pi]."""
        return wrap_phase(self.phi1 - self.phi3)

    @property
    def beta1(self) -> complex:
        return self.a1 * np.exp(1j * self.phi1)

    @property
    def beta3(self) -> complex:
        return self.a3 * np.exp(1j * self.phi3)

    def initial_amplitudes(self) -> ThreeQubitAmplitudes:
        return ThreeQubitAmplitudes(complex(self.beta1), 0j, complex(self.beta3), 0.0)


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Edge-pair density matrix in the single-excitation sector; rho31 = conj(rho13)."""

    p11: float
    p33: float
    rho13: complex

    def __post_init__(self):
        if self.p11 < 0 or self.p33 < 0:
            raise ValueError("populations must be non-negative")
        if abs(self.p11 + self.p33 - 1.0) > 1e-9:
            raise ValueError(f"trace {self.p11 + self.p33} is not 1")
        if abs(self.rho13) ** 2 > self.p11 * self.p33 + 1e-12:
            raise ValueError("coherence violates positivity bound")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.p11, self.rho13], [np.conj(self.rho13), self.p33]], dtype=complex
        )


@dataclass(frozen=True)
class ModulationPulse:
    """
    Detuning f(t) of the central qubit, in units of Gamma versus Gamma*t.

    ``edges`` are the breakpoints. For ``rectangular`` and ``piecewise`` shapes
    ``levels[i]`` holds the constant value on ``[edges[i], edges[i+1])``. For
    ``tabulated`` shapes ``levels[i]`` is the sample at ``edges[i]`` and the
    pulse is linearly interpolated. Outside ``[edges[0], edges[-1]]`` f is 0.
    """

    shape: str
    edges: tuple[float, ...]
    levels: tuple[float, ...]
    _cum: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        edges = tuple(float(x) for x in self.edges)
        levels = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "levels", levels)
        if len(edges) < 2:
            raise ValueError("pulse needs at least two edges")
        n_levels = len(edges) if self.shape == "tabulated" else len(edges) - 1
        if len(levels) != n_levels:
            raise ValueError(f"{self.shape} pulse needs {n_levels} levels, got {len(levels)}")
        if self.shape == "rectangular" and len(levels) != 1:
            raise ValueError("rectangular pulse has exactly one level")
        if edges[0] < 0:
            raise ValueError("pulse cannot start before t = 0")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("pulse edges must be strictly increasing")
        peak = max(abs(v) for v in levels)
        if peak > AMPLITUDE_CAP:
            raise AmplitudeCapExceeded(
                f"|f| = {peak:.4g} Gamma exceeds the cap of {AMPLITUDE_CAP} Gamma"
            )
        if peak > AMPLITUDE_WARN:
            warnings.warn(
                f"|f| = {peak:.4g} Gamma is above {AMPLITUDE_WARN} Gamma; "
                "analytic formulas lose accuracy",
                ValidityWarning,
                stacklevel=3,
            )
        # running integral at each edge
        cum = [0.0]
        for i in range(len(edges) - 1):
            width = edges[i + 1] - edges[i]
            if self.shape == "tabulated":
                area = 0.5 * (levels[i] + levels[i + 1]) * width
            else:
                area = levels[i] * width
            cum.append(cum[-1] + area)
        object.__setattr__(self, "_cum", tuple(cum))

    @classmethod
    def rectangular(cls, amplitude: float, t_start: float, t_end: float) -> "ModulationPulse":
        return cls("rectangular", (t_start, t_end), (amplitude,))

    @classmethod
    def piecewise(cls, edges, levels) -> "ModulationPulse":
        return cls("piecewise", tuple(edges), tuple(levels))

    @classmethod
    def tabulated(cls, times, values) -> "ModulationPulse":
        return cls("tabulated", tuple(times), tuple(values))

    @classmethod
    def zero(cls) -> "ModulationPulse":
        return cls("rectangular", (0.0, 1.0), (0.0,))

    @property
    def t_start_gamma(self) -> float:
        return self.edges[0]

    @property
    def t_end_gamma(self) -> float:
        return self.edges[-1]

    @property
    def is_piecewise_constant(self) -> bool:
        return self.shape != "tabulated"

    @property
    def peak(self) -> float:
        return max(abs(v) for v in self.levels)

    def value(self, t: float) -> float:
        """f(t)/Gamma at dimensionless time t (right-continuous at edges)."""
        e = self.edges
        if t < e[0] or t > e[-1]:
            return 0.0
        if self.shape == "tabulated":
            return float(np.interp(t, e, self.levels))
        if t == e[-1]:
            return 0.0
        i = int(np.searchsorted(e, t, side="right")) - 1
        return self.levels[i]

    def integral(self, t: float) -> float:
        e = self.edges
        if t <= e[0]:
            return 0.0
        if t >= e[-1]:
            return self._cum[-1]
        i = int(np.searchsorted(e, t, side="right")) - 1
        dt = t - e[i]
        if self.shape == "tabulated":
            slope = (self.levels[i + 1] - self.levels[i]) / (e[i + 1] - e[i])
            return self._cum[i] + self.levels[i] * dt + 0.5 * slope * dt * dt
        return self._cum[i] + self.levels[i] * dt

    def to_dict(self) -> dict:
        """Same keys the scenario config accepts for an explicit pulse."""
        if self.shape == "rectangular":
            return {
                "shape": "rectangular",
                "amplitude_over_gamma": self.levels[0],
                "t_start_gamma": self.edges[0],
                "t_end_gamma": self.edges[1],
            }
        if self.shape == "piecewise":
            return {"shape": "piecewise", "edges": list(self.edges), "amplitude_over_gamma": list(self.levels)}
        return {"shape": "tabulated", "times_gamma": list(self.edges), "values_over_gamma": list(self.levels)}


def pulse_integral(pulse: ModulationPulse, t: float) -> float:
    """Integral of f from 0 to t (dimensionless); F(t) = -i times this."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return pulse.integral(t)


def pulse_area_u(pulse: ModulationPulse, t: float) -> float:
    return 2.0 / 3.0 * pulse_integral(pulse, t)


def pulse_lambda(pulse: ModulationPulse, t: float) -> float:
    """Leak exponent u(t)^2 / (3 Gamma t); 0 at t = 0 by continuity."""
    if t == 0:
        return 0.0
    u = pulse_area_u(pulse, t)
    return u * u / (3.0 * t)


def design_pulse(u_target: float, t_start_gamma: float, duration_gamma: float) -> ModulationPulse:
    """Rectangular pulse whose area u reaches ``u_target`` at its end."""
    if u_target == 0:
        raise ValueError("u_target must be non-zero")
    if duration_gamma <= 0:
        raise ValueError("duration_gamma must be positive")
    amplitude = 1.5 * u_target / duration_gamma
    return ModulationPulse.rectangular(amplitude, t_start_gamma, t_start_gamma + duration_gamma)


def coupling_from_decay(gamma: float, v_g: float, length: float) -> float:
    """Waveguide coupling g_k = sqrt(v_g * Gamma / (2 L))."""
    if gamma <= 0 or v_g <= 0 or length <= 0:
        raise ValueError("all arguments must be positive")
    return math.sqrt(v_g * gamma / (2.0 * length))


def density_from_preparation(prep: TwoQubitPreparation) -> ReducedDensityMatrix:
    rho13 = prep.a1 * prep.a3 * np.exp(1j * (prep.phi1 - prep.phi3))
    return ReducedDensityMatrix(prep.a1**2, prep.a3**2, complex(rho13))
