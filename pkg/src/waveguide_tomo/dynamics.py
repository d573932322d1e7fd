"""
Fixed-step RK4 propagation of the three-qubit amplitude equations.

The equations are linear in the amplitudes, so one RK4 step is a 3x3 matrix
``S`` built by pushing the identity through the four stages of :func:`rhs`.
On stretches where f is constant ``S`` is fixed and ``n`` steps are applied
as ``S**n``; this is the same discrete map as stepping one at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from .model import ModulationPulse, SystemConfig, ThreeQubitAmplitudes, TwoQubitPreparation

MAX_STEP_PRODUCT = 0.05


class StepTooLarge(ArithmeticError):
    """Integrator step is too coarse for the modulation amplitude."""


def phase_factor(kd: float) -> complex:
    """e^{i kd}, snapped to exactly +-1 when kd is a multiple of pi."""
    n = round(kd / math.pi)
    if abs(kd - n * math.pi) < 1e-12:
        return complex((-1) ** n)
    return complex(np.exp(1j * kd))


def rhs(state, f_now: float, kd: float, gamma: float = 1.0) -> np.ndarray:
    """
    Time derivative of (beta_1, beta_2, beta_3).

    ``state`` may be a :class:`ThreeQubitAmplitudes` or any array whose first
    axis has length 3 (columns are propagated independently).
    """
    if isinstance(state, ThreeQubitAmplitudes):
        b = state.as_array()
    else:
        b = np.asarray(state, dtype=complex)
    e = phase_factor(kd)
    e2 = e * e
    b1, b2, b3 = b[0], b[1], b[2]
    half = 0.5 * gamma
    return np.stack(
        [
            -half * (b1 + b2 * e + b3 * e2),
            -1j * f_now * b2 - half * (b1 * e + b2 + b3 * e),
            -half * (b1 * e2 + b2 * e + b3),
        ]
    )


def rk4_step_matrix(h: float, f_stages: tuple[float, float, float], kd: float) -> np.ndarray:
    """One classical RK4 step as a matrix; ``f_stages`` = f at t, t+h/2, t+h."""
    f0, fm, f1 = f_stages
    y = np.eye(3, dtype=complex)
    k1 = rhs(y, f0, kd)
    k2 = rhs(y + 0.5 * h * k1, fm, kd)
    k3 = rhs(y + 0.5 * h * k2, fm, kd)
    k4 = rhs(y + h * k3, f1, kd)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _segments(pulse: ModulationPulse, t_final: float, dt: float):
    """Split [0, t_final] at pulse breakpoints; yields (a, b, n_steps)."""
    cuts = sorted({0.0, t_final, *(e for e in pulse.edges if 0.0 < e < t_final)})
    for a, b in zip(cuts, cuts[1:]):
        n = max(1, math.ceil((b - a) / dt - 1e-9))
        yield a, b, n


def _check_step(pulse: ModulationPulse, dt: float) -> None:
    if dt * max(1.0, pulse.peak) > MAX_STEP_PRODUCT:
        raise StepTooLarge(
            f"dt_gamma * max(1, |f|/Gamma) = {dt * max(1.0, pulse.peak):.3g} > {MAX_STEP_PRODUCT}"
        )


def _blocks(
    pulse: ModulationPulse, config: SystemConfig, t_final: float, sample_every: int
) -> Iterator[tuple[float, np.ndarray, bool]]:
    """Yield (t_after_block, block_matrix, lands_on_sample) in time order."""
    _check_step(pulse, config.dt_gamma)
    kd = config.kd
    k = 0
    for a, b, n in _segments(pulse, t_final, config.dt_gamma):
        h = (b - a) / n
        j = 0
        outside = b <= pulse.t_start_gamma or a >= pulse.t_end_gamma
        if pulse.is_piecewise_constant or outside:
            f = pulse.value(0.5 * (a + b))
            step = rk4_step_matrix(h, (f, f, f), kd)
            powers: dict[int, np.ndarray] = {}
            while j < n:
                m = min(n - j, sample_every - k % sample_every)
                if m not in powers:
                    powers[m] = np.linalg.matrix_power(step, m)
                j += m
                k += m
                yield (b if j == n else a + j * h), powers[m], k % sample_every == 0
        else:
            while j < n:
                t = a + j * h
                fs = (pulse.value(t), pulse.value(t + 0.5 * h), pulse.value(t + h))
                j += 1
                k += 1
                yield (b if j == n else a + j * h), rk4_step_matrix(h, fs, kd), k % sample_every == 0


def n_steps(pulse: ModulationPulse, config: SystemConfig, t_final_gamma: float) -> int:
    return sum(n for _, _, n in _segments(pulse, t_final_gamma, config.dt_gamma))


def default_sample_every(pulse: ModulationPulse, config: SystemConfig, t_final_gamma: float) -> int:
    """Stride giving at least 1000 output points."""
    return max(1, n_steps(pulse, config, t_final_gamma) // 1000)


@dataclass(frozen=True)
class Trajectory:
    t_gamma: np.ndarray
    amplitudes: np.ndarray
    config: SystemConfig
    pulse: ModulationPulse

    def __post_init__(self):
        if len(self.t_gamma) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.t_gamma) <= 0):
            raise ValueError("sample times must be strictly increasing")
        norm = self.total_population
        if np.any(np.diff(norm) > 1e-9):
            raise ValueError("total population increased along the trajectory")

    def __len__(self):
        return len(self.t_gamma)

    @property
    def total_population(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    @property
    def samples(self) -> list[ThreeQubitAmplitudes]:
        return [ThreeQubitAmplitudes.from_array(b, t) for t, b in zip(self.t_gamma, self.amplitudes)]

    @property
    def final(self) -> ThreeQubitAmplitudes:
        return ThreeQubitAmplitudes.from_array(self.amplitudes[-1], self.t_gamma[-1])

    def at(self, t_gamma: float) -> np.ndarray:
        """Amplitudes at the sample nearest to ``t_gamma``."""
        i = int(np.argmin(np.abs(self.t_gamma - t_gamma)))
        return self.amplitudes[i]


def propagate_amplitudes(
    b0,
    pulse: ModulationPulse,
    config: SystemConfig,
    t_final_gamma: float,
    sample_every: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`propagate` but from an arbitrary (unnormalised) start vector."""
    if not t_final_gamma > 0:
        raise ValueError("t_final_gamma must be positive")
    if sample_every is None:
        sample_every = default_sample_every(pulse, config, t_final_gamma)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    b = np.asarray(b0, dtype=complex).copy()
    times = [0.0]
    states = [b.copy()]
    t = 0.0
    for t, block, on_sample in _blocks(pulse, config, t_final_gamma, sample_every):
        b = block @ b
        if on_sample:
            times.append(t)
            states.append(b)
    if times[-1] != t:
        times.append(t)
        states.append(b)
    return np.array(times), np.array(states)


def propagate(
    prep: TwoQubitPreparation,
    pulse: ModulationPulse,
    config: SystemConfig,
    t_final_gamma: float,
    sample_every: int | None = None,
) -> Trajectory:
    """Integrate from (beta_1(0), 0, beta_3(0)) up to ``t_final_gamma``."""
    b0 = prep.initial_amplitudes().as_array()
    t, amps = propagate_amplitudes(b0, pulse, config, t_final_gamma, sample_every)
    return Trajectory(t, amps, config, pulse)


@lru_cache(maxsize=64)
def propagator(pulse: ModulationPulse, config: SystemConfig, t_final_gamma: float) -> np.ndarray:
    """The RK4 transfer matrix P with beta(t_final) = P beta(0)."""
    if not t_final_gamma > 0:
        raise ValueError("t_final_gamma must be positive")
    p = np.eye(3, dtype=complex)
    for _, block, _ in _blocks(pulse, config, t_final_gamma, 1 << 62):
        p = block @ p
    p.setflags(write=False)
    return p


class Observables(NamedTuple):
    t_gamma: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    d: np.ndarray
    S: np.ndarray


def observables(traj: Trajectory) -> Observables:
    pops = np.abs(traj.amplitudes) ** 2
    p1, p2, p3 = pops[:, 0], pops[:, 1], pops[:, 2]
    return Observables(traj.t_gamma, p1, p2, p3, p1 - p3, p1 + p3)
