"""Scenario configuration: JSON parsing, presets and the resolved canonical form."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import ModulationPulse, SystemConfig, TwoQubitPreparation, design_pulse
from .tomography import ProtocolParams


class ConfigError(ValueError):
    pass


PRESETS: dict[str, dict] = {
    "fig3": {
        "system": {"gamma": 1.0, "kd_pi": 2.0, "dt_gamma": 1e-3},
        "preparation": {"a1_sq": 0.5, "phi1_pi": 0.0, "phi3_pi": 0.4},
        "pulse": {"u_target_pi": 0.5, "t_start_gamma": 10.0, "duration_gamma": 141.0},
        "t_final_gamma": 200.0,
    },
    "fig4": {
        "system": {"gamma": 1.0, "kd_pi": 2.0, "dt_gamma": 1e-3},
        "preparation": {"a1_sq": 0.5, "phi1_pi": 0.0, "phi3_pi": 0.4},
        "pulse": {"u_target_pi": 1.0, "t_start_gamma": 10.0, "duration_gamma": 141.0},
        "t_final_gamma": 200.0,
    },
    "free": {
        "system": {"gamma": 1.0, "kd_pi": 2.0, "dt_gamma": 1e-3},
        "preparation": {"a1_sq": 1.0, "phi1_pi": 0.0, "phi3_pi": 0.0},
        "pulse": None,
        "t_final_gamma": 20.0,
    },
}

DEFAULT_SWEEP = {
    "a1_sq": {"start": 0.1, "stop": 0.9, "num": 9},
    "dphi_pi": {"start": -0.875, "stop": 1.0, "num": 16},
}


@dataclass(frozen=True)
class SweepGrid:
    a1_sq: tuple[float, ...]
    dphi: tuple[float, ...]

    def points(self) -> list[tuple[float, float]]:
        return [(a, p) for a in self.a1_sq for p in self.dphi]


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemConfig
    preparation: TwoQubitPreparation
    pulse: ModulationPulse | None
    t_final_gamma: float
    protocol: ProtocolParams
    sweep: SweepGrid
    shots: int | None = None
    seed: int | None = None
    output_path: str | None = None
    output_format: str | None = None
    resolved: dict = field(default_factory=dict, compare=False)

    def effective_pulse(self) -> ModulationPulse:
        return self.pulse if self.pulse is not None else ModulationPulse.zero()


def deep_merge(base: dict, over: dict, replace: tuple[str, ...] = ()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in replace and isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _section(data: dict, key: str) -> dict:
    sec = data.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected an object")
    return sec


def _number(sec: dict, key: str, where: str, default=None, required=False) -> float | None:
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError(f"{where}.{key}: required")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: must be finite")
    return float(v)


def _angle(sec: dict, stem: str, where: str, default: float = 0.0) -> float:
    rad, pi = f"{stem}_rad", f"{stem}_pi"
    if rad in sec and pi in sec:
        raise ConfigError(f"{where}: give only one of {rad} / {pi}")
    if pi in sec:
        return _number(sec, pi, where) * math.pi
    if stem in sec:
        return _number(sec, stem, where)
    return _number(sec, rad, where, default)


def _int(data: dict, key: str, positive=False) -> int | None:
    v = data.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{key}: must be positive")
    return v


def _axis(spec: Any, where: str, scale: float = 1.0) -> tuple[float, ...]:
    if isinstance(spec, list):
        vals = spec
    elif isinstance(spec, dict):
        num = spec.get("num")
        if not isinstance(num, int) or num < 1:
            raise ConfigError(f"{where}.num: expected a positive integer")
        start = _number(spec, "start", where, required=True)
        stop = _number(spec, "stop", where, required=True)
        vals = np.linspace(start, stop, num).tolist()
    else:
        raise ConfigError(f"{where}: expected a list or {{start, stop, num}}")
    try:
        return tuple(float(v) * scale for v in vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: non-numeric entry") from exc


def _parse_pulse(sec: Any) -> ModulationPulse | None:
    if sec is None:
        return None
    if not isinstance(sec, dict):
        raise ConfigError("pulse: expected an object or null")
    design = any(k in sec for k in ("u_target", "u_target_pi", "duration_gamma"))
    explicit = "shape" in sec
    if design and explicit:
        raise ConfigError("pulse: give either an explicit shape or a design triple, not both")
    if design:
        if "u_target" in sec and "u_target_pi" in sec:
            raise ConfigError("pulse: give only one of u_target / u_target_pi")
        if "u_target_pi" in sec:
            u = _number(sec, "u_target_pi", "pulse") * math.pi
        else:
            u = _number(sec, "u_target", "pulse", required=True)
        t0 = _number(sec, "t_start_gamma", "pulse", required=True)
        dur = _number(sec, "duration_gamma", "pulse", required=True)
        return design_pulse(u, t0, dur)
    if not explicit:
        raise ConfigError("pulse: missing 'shape' or design triple")
    shape = sec["shape"]
    if shape == "rectangular":
        return ModulationPulse.rectangular(
            _number(sec, "amplitude_over_gamma", "pulse", required=True),
            _number(sec, "t_start_gamma", "pulse", required=True),
            _number(sec, "t_end_gamma", "pulse", required=True),
        )
    if shape == "piecewise":
        return ModulationPulse.piecewise(
            _axis(sec.get("edges"), "pulse.edges"), _axis(sec.get("amplitude_over_gamma"), "pulse.amplitude_over_gamma")
        )
    if shape == "tabulated":
        return ModulationPulse.tabulated(
            _axis(sec.get("times_gamma"), "pulse.times_gamma"), _axis(sec.get("values_over_gamma"), "pulse.values_over_gamma")
        )
    raise ConfigError(f"pulse.shape: unknown shape {shape!r}")


def _parse_preparation(sec: dict) -> TwoQubitPreparation:
    where = "preparation"
    if "a1_sq" in sec:
        if "a1" in sec:
            raise ConfigError(f"{where}: give only one of a1 / a1_sq")
        a1_sq = _number(sec, "a1_sq", where)
        if not 0 <= a1_sq <= 1:
            raise ConfigError(f"{where}.a1_sq: must lie in [0, 1]")
        a1 = math.sqrt(a1_sq)
    else:
        a1 = _number(sec, "a1", where, required=True)
        if not 0 <= a1 <= 1:
            raise ConfigError(f"{where}.a1: must lie in [0, 1]")
    a3_norm = math.sqrt(max(0.0, 1.0 - a1 * a1))
    a3 = _number(sec, "a3", where, a3_norm)
    if abs(a1 * a1 + a3 * a3 - 1) > 1e-9:
        raise ConfigError(f"{where}.a3: a1^2 + a3^2 must equal 1")
    phi1 = _angle(sec, "phi1", where)
    phi3 = _angle(sec, "phi3", where)
    return TwoQubitPreparation(a1, a3_norm, phi1, phi3)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a raw config mapping; errors name the offending field."""
    known = {"system", "preparation", "pulse", "t_final_gamma", "shots", "seed", "output", "protocol", "sweep"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    sys_sec = _section(data, "system")
    if "kd" in sys_sec or "kd_pi" in sys_sec or "kd_rad" in sys_sec:
        kd = _angle(sys_sec, "kd", "system")
    else:
        kd = 2 * math.pi
    gamma = _number(sys_sec, "gamma", "system", 1.0)
    dt = _number(sys_sec, "dt_gamma", "system", 1e-3)
    try:
        system = SystemConfig(gamma=gamma, kd=kd, dt_gamma=dt)
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from exc

    try:
        prep = _parse_preparation(_section(data, "preparation") or {"a1_sq": 1.0})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"preparation: {exc}") from exc

    try:
        pulse = _parse_pulse(data.get("pulse"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"pulse: {exc}") from exc

    default_final = pulse.t_end_gamma + 50.0 if pulse is not None else 20.0
    t_final = _number(data, "t_final_gamma", "config", default_final)
    if t_final <= 0:
        raise ConfigError("t_final_gamma: must be positive")

    proto_sec = _section(data, "protocol")
    lam_corr = proto_sec.get("lambda_correct", False)
    if not isinstance(lam_corr, bool):
        raise ConfigError("protocol.lambda_correct: expected true/false")
    protocol = ProtocolParams(
        kd=kd,
        t_start_gamma=_number(proto_sec, "t_start_gamma", "protocol", 10.0),
        duration_gamma=_number(proto_sec, "duration_gamma", "protocol", 141.0),
        settle_gamma=_number(proto_sec, "settle_gamma", "protocol", 5.0),
        dt_gamma=dt,
        eps_prod=_number(proto_sec, "eps_prod", "protocol", ProtocolParams.eps_prod),
        lambda_correct=lam_corr,
    )
    if protocol.duration_gamma <= 0 or protocol.t_start_gamma < 0 or protocol.settle_gamma < 0:
        raise ConfigError("protocol: timings must be non-negative with positive duration")

    sweep_sec = deep_merge(DEFAULT_SWEEP, _section(data, "sweep"))
    if "dphi_rad" in _section(data, "sweep"):
        sweep_sec.pop("dphi_pi", None)
        dphi = _axis(sweep_sec["dphi_rad"], "sweep.dphi_rad")
    else:
        dphi = _axis(sweep_sec["dphi_pi"], "sweep.dphi_pi", math.pi)
    a1_sq = _axis(sweep_sec["a1_sq"], "sweep.a1_sq")
    if any(not 0 <= a <= 1 for a in a1_sq):
        raise ConfigError("sweep.a1_sq: values must lie in [0, 1]")
    sweep = SweepGrid(a1_sq, dphi)

    out_sec = _section(data, "output")
    path = out_sec.get("path")
    fmt = out_sec.get("format")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path: expected a string")
    if fmt not in (None, "csv", "json"):
        raise ConfigError("output.format: expected 'csv' or 'json'")

    cfg = ScenarioConfig(
        system=system,
        preparation=prep,
        pulse=pulse,
        t_final_gamma=t_final,
        protocol=protocol,
        sweep=sweep,
        shots=_int(data, "shots", positive=True),
        seed=_int(data, "seed"),
        output_path=path,
        output_format=fmt,
    )
    object.__setattr__(cfg, "resolved", resolved_dict(cfg))
    return cfg


def resolved_dict(cfg: ScenarioConfig) -> dict:
    """Canonical, fully explicit form of the config (radians, explicit pulse)."""
    p = cfg.preparation
    proto = cfg.protocol
    return {
        "system": {"gamma": cfg.system.gamma, "kd_rad": cfg.system.kd, "dt_gamma": cfg.system.dt_gamma},
        "preparation": {"a1": p.a1, "a3": p.a3, "phi1_rad": p.phi1, "phi3_rad": p.phi3},
        "pulse": None if cfg.pulse is None else cfg.pulse.to_dict(),
        "t_final_gamma": cfg.t_final_gamma,
        "protocol": {
            "t_start_gamma": proto.t_start_gamma,
            "duration_gamma": proto.duration_gamma,
            "settle_gamma": proto.settle_gamma,
            "eps_prod": proto.eps_prod,
            "lambda_correct": proto.lambda_correct,
        },
        "sweep": {"a1_sq": list(cfg.sweep.a1_sq), "dphi_rad": list(cfg.sweep.dphi)},
        "shots": cfg.shots,
        "seed": cfg.seed,
    }


def build_config(preset: str | None = None, path: str | Path | None = None, overrides: dict | None = None) -> ScenarioConfig:
    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        data = copy.deepcopy(PRESETS[preset])
    if path is not None:
        data = deep_merge(data, load_json(path), replace=("pulse",))
    if overrides:
        data = deep_merge(data, overrides, replace=("pulse",))
    return parse_config(data)
