"""
Command-line front end.

    waveguide-tomo simulate    --preset fig3 --out fig3.csv
    waveguide-tomo reconstruct --config state.json
    waveguide-tomo sweep       --observables
    waveguide-tomo validate

Exit codes: 0 ok, 2 config error, 3 numeric guard, 4 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import validation
from .analytic import asymptotic_observables
from .config import ConfigError, ScenarioConfig, build_config
from .dynamics import StepTooLarge, observables, propagate
from .model import TwoQubitPreparation, pulse_area_u, pulse_lambda
from .tomography import measure, phase_error, reconstruct

OUTPUT_DIR_ENV = "WAVEGUIDE_TOMO_OUTPUT_DIR"
CSV_COLUMNS = ["t_gamma", "p1", "p2", "p3", "d", "S", "re_b1", "im_b1", "re_b2", "im_b2", "re_b3", "im_b3"]
SWEEP_COLUMNS = ["a1_sq_true", "dphi_true", "a1_sq_est", "dphi_est", "err_pop", "err_phase"]
OBSERVABLE_COLUMNS = ["pulse", "a1_sq", "p3", "a3", "dphi", "d", "S", "d_limit", "S_limit"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


def output_path(requested: str | None, cfg: ScenarioConfig, default_name: str) -> Path:
    path = Path(requested or cfg.output_path or default_name)
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        path = Path(override) / path.name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, config: dict, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: ScenarioConfig, out: str | None = None) -> int:
    pulse = cfg.effective_pulse()
    traj = propagate(cfg.preparation, pulse, cfg.system, cfg.t_final_gamma)
    obs = observables(traj)
    amps = traj.amplitudes
    rows = (
        (t, p1, p2, p3, d, s, b[0].real, b[0].imag, b[1].real, b[1].imag, b[2].real, b[2].imag)
        for t, p1, p2, p3, d, s, b in zip(obs.t_gamma, obs.p1, obs.p2, obs.p3, obs.d, obs.S, amps)
    )
    path = output_path(out, cfg, "simulate.csv")
    write_csv(path, cfg.resolved, CSV_COLUMNS, rows)

    t_end = cfg.t_final_gamma
    summary = {
        "config": cfg.resolved,
        "post_pulse": {"t_gamma": float(obs.t_gamma[-1]), "d": float(obs.d[-1]), "S": float(obs.S[-1]), "p2": float(obs.p2[-1])},
        "min_total_population_step": float(np.min(np.diff(traj.total_population), initial=0.0)),
    }
    if cfg.pulse is not None:
        u = pulse_area_u(pulse, t_end)
        lam = pulse_lambda(pulse, t_end)
        d, s, p2 = asymptotic_observables(cfg.preparation, u, lam)
        summary["analytic"] = {"u": u, "lambda": lam, "d": d, "S": s, "p2": p2, "valid_for_kd": "2 pi"}
    summary_path = path.with_name(path.stem + ".summary.json")
    write_json(summary_path, summary)
    print(f"simulate: {len(traj)} samples -> {path}; final d={obs.d[-1]:.6f} S={obs.S[-1]:.6f} p2={obs.p2[-1]:.6f}")
    return EXIT_OK


def _report_payload(cfg: ScenarioConfig, prep: TwoQubitPreparation, shots, seed) -> dict:
    rep = reconstruct(prep, cfg.protocol, shots, seed)
    true_rho13 = prep.a1 * prep.a3 * complex(math.cos(prep.dphi), math.sin(prep.dphi))
    est = rep.to_dict()
    errors = {
        "a1_sq": abs(rep.a1_est**2 - prep.a1**2),
        "a1": abs(rep.a1_est - prep.a1),
        "a3": abs(rep.a3_est - prep.a3),
        "phase": None if rep.flags["phase_indeterminate"] else phase_error(rep.phi_est, prep.dphi),
        "rho13": abs(rep.rho_est.rho13 - true_rho13),
    }
    return {
        "config": cfg.resolved,
        "phase_convention": "phi1 - phi3",
        "true": {"a1": prep.a1, "a3": prep.a3, "a1_sq": prep.a1**2, "dphi": prep.dphi},
        "estimate": est,
        "errors": errors,
        "phase_indeterminate": est["phase_indeterminate"],
    }


def cmd_reconstruct(cfg: ScenarioConfig, out: str | None = None) -> int:
    payload = _report_payload(cfg, cfg.preparation, cfg.shots, cfg.seed)
    path = output_path(out, cfg, "reconstruct.json")
    write_json(path, payload)
    err = payload["errors"]
    phase = "indeterminate" if err["phase"] is None else f"{err['phase']:.4g} rad"
    print(f"reconstruct: a1_sq error {err['a1_sq']:.4g}, phase error {phase} -> {path}")
    return EXIT_OK


def _sweep_point(cfg: ScenarioConfig, index: int, a1_sq: float, dphi: float):
    prep = TwoQubitPreparation.from_population(a1_sq, dphi)
    seed = None if cfg.seed is None else [cfg.seed, index]
    rep = reconstruct(prep, cfg.protocol, cfg.shots, seed)
    a1_sq_est = rep.a1_est**2
    return (a1_sq, prep.dphi, a1_sq_est, rep.phi_est, abs(a1_sq_est - a1_sq), phase_error(rep.phi_est, prep.dphi))


def _observable_rows(cfg: ScenarioConfig):
    for kind, u in (("half_pi", math.pi / 2), ("pi", math.pi)):
        for a1_sq, dphi in cfg.sweep.points():
            prep = TwoQubitPreparation.from_population(a1_sq, dphi)
            rec = measure(prep, kind, cfg.protocol)
            d_lim, s_lim, _ = asymptotic_observables(prep, u, 0.0)
            yield (kind, a1_sq, 1.0 - a1_sq, prep.a3, prep.dphi, rec.d, rec.S, d_lim, s_lim)


def cmd_sweep(cfg: ScenarioConfig, out: str | None = None, emit_observables: bool = False, workers: int = 1) -> int:
    points = cfg.sweep.points()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda ip: _sweep_point(cfg, ip[0], *ip[1]), enumerate(points)))
    path = output_path(out, cfg, "sweep.csv")
    write_csv(path, cfg.resolved, SWEEP_COLUMNS, rows)
    if emit_observables:
        obs_path = path.with_name(path.stem + ".observables.csv")
        write_csv(obs_path, cfg.resolved, OBSERVABLE_COLUMNS, _observable_rows(cfg))
    worst_phase = max(r[5] for r in rows)
    worst_pop = max(r[4] for r in rows)
    print(f"sweep: {len(rows)} points, max err_pop {worst_pop:.4g}, max err_phase {worst_phase:.4g} rad -> {path}")
    return EXIT_OK


def cmd_validate(cfg: ScenarioConfig, out: str | None = None) -> int:
    result = validation.run_all(cfg.system.dt_gamma)
    result["config"] = cfg.resolved
    path = output_path(out, cfg, "validate.json")
    write_json(path, result)
    for name, check in result["checks"].items():
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {name}: {check['max_deviation']:.3g} (tol {check['tolerance']:.0e})")
    return EXIT_OK if result["passed"] else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveguide-tomo", description=__doc__.split("\n")[1])
    parser.add_argument("command", choices=["simulate", "reconstruct", "sweep", "validate"])
    parser.add_argument("--config", help="JSON scenario file")
    parser.add_argument("--preset", choices=["fig3", "fig4", "free"])
    parser.add_argument("--out", help="output file path")
    parser.add_argument("--shots", type=int, help="binomial readout shots (default: exact populations)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--observables", action="store_true", help="sweep: also write d/S surfaces")
    parser.add_argument("--workers", type=int, default=1, help="sweep: worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.shots is not None:
        overrides["shots"] = args.shots
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = build_config(args.preset, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.observables, args.workers)
        return cmd_validate(cfg, args.out)
    except StepTooLarge as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
