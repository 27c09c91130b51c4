"""Command-line front end: design, simulate, check, scenarios.

Exit codes (stable):
  0  success (for ``check``: every verdict passed)
  1  usage or I/O error
  2  check verdicts failed (including a negative discriminant)
  3  plant assumption violated
  4  relative-degree mismatch in augmentation
  5  square-up search failed
  6  passivity certification failed (infeasible or singular mixing matrix)
  7  Riccati/Lyapunov solver failure
  8  non-finite state during integration

Verbosity is controlled by the ADAPTLIM_LOG environment variable
(quiet, info, or debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .controller import ControllerGains, truth_companions
from .design import design_controller
from .errors import (
    AssumptionViolation,
    Infeasible,
    NonFiniteState,
    NoStabilizingSolution,
    NotHurwitz,
    NotStabilizable,
    RelativeDegreeMismatch,
    SMatrixSingular,
    SprInfeasible,
    SquareUpFailed,
)
from .plant import augment
from .scenarios import BUILTIN_NAMES, builtin_scenario
from .sim import MODES, SimContext, TrajectoryLog, integrated_abs_error, run
from .stability import (
    assemble_closed_loop,
    attach_closed_loop_diagnostics,
    compute_report,
    runtime_monitor,
)
from .svgplot import plot_panels

log = logging.getLogger("adaptlim")

_ERROR_CODES = [
    (AssumptionViolation, 3),
    (RelativeDegreeMismatch, 4),
    (SquareUpFailed, 5),
    ((SprInfeasible, SMatrixSingular, Infeasible), 6),
    ((NotStabilizable, NoStabilizingSolution, NotHurwitz), 7),
    (NonFiniteState, 8),
]


def _exit_code_for(exc: Exception) -> int:
    for types, code in _ERROR_CODES:
        if isinstance(exc, types):
            return code
    return 1


# ---------------------------------------------------------------- CSV i/o

def csv_columns(log_: TrajectoryLog) -> list[tuple[str, np.ndarray]]:
    """Fixed, documented column order for emitted trajectories."""
    sig = log_.signals
    cols: list[tuple[str, np.ndarray]] = [("t", log_.t)]

    def multi(prefix, arr):
        arr = np.atleast_2d(np.asarray(arr))
        if arr.shape[0] != log_.n_samples:
            arr = arr.T
        for j in range(arr.shape[1]):
            cols.append((f"{prefix}_{j}", arr[:, j]))

    multi("z_cmd", sig["z_cmd"])
    multi("z", sig["z"])
    multi("y", sig["y"])
    multi("u", sig["u"])
    multi("u_p", log_.block("u_p"))
    multi("u_r", sig["u_r"])
    multi("du2", sig["du2"])
    multi("e_y", sig["e_y"])
    multi("e_y_u", sig["e_y_u"])
    n = log_.n_samples
    V = log_.V if log_.V is not None else np.full(n, np.nan)
    W = log_.W if log_.W is not None else np.full(n, np.nan)
    ot = (log_.omega_tilde_norm if log_.omega_tilde_norm is not None
          else np.full(n, np.nan))
    cols.append(("V", V))
    cols.append(("W", W))
    cols.append(("omega_tilde_norm", ot))
    return cols


def emit_csv(log_: TrajectoryLog, path) -> None:
    """Write the trajectory with 17 significant digits (lossless floats)."""
    cols = csv_columns(log_)
    header = ",".join(name for name, _ in cols)
    arrays = [np.asarray(a, dtype=float) for _, a in cols]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(log_.n_samples):
            fh.write(",".join("%.17g" % a[i] for a in arrays) + "\n")


def parse_csv(path) -> dict[str, np.ndarray]:
    """Read an emitted trajectory back into named float columns."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [[float(tok) for tok in line.strip().split(",")]
                for line in fh if line.strip()]
    mat = np.asarray(data, dtype=float)
    return {name: mat[:, j] for j, name in enumerate(header)}


# ---------------------------------------------------------------- helpers

def _load_scenario(args) -> "cfg.Scenario":
    sc = cfg.load_scenario(args.scenario)
    updates = {}
    if getattr(args, "h", None) is not None:
        updates["h"] = args.h
    if getattr(args, "T", None) is not None:
        updates["T"] = args.T
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if updates:
        from dataclasses import replace
        sc = replace(sc, **updates)
    return sc


def _design_for(sc):
    plant_aug = augment(sc.plant, sc.actuator)
    design = design_controller(
        plant_aug, sc.Q_lqr, sc.R_lqr, a1_1=sc.a1_1, a1_0=sc.a1_0,
        eps_start=sc.eps_start, eps_cap=sc.eps_cap,
        n_random_samples=sc.n_uncertainty_samples, seed=sc.seed)
    return plant_aug, design


def _design_report_text(sc, plant_aug, design) -> str:
    cert = design.certificate
    lines = [
        f"design report: scenario '{sc.name}'",
        f"  dimensions: n={plant_aug.n} m={plant_aug.m} p={plant_aug.p}",
        f"  baseline gain K: {design.K.shape}, closed-loop eigenvalues "
        f"{np.sort(np.linalg.eigvals(plant_aug.A - plant_aug.B2 @ design.K).real)}",
        f"  square-up columns: {design.B_s1.shape[1]}"
        + (" (none needed, square system)" if design.B_s1.shape[1] == 0 else ""),
        f"  zero-placement coefficients: a1_1={design.a1_1} a1_0={design.a1_0}",
        f"  feedback strength eps: {design.epsilon:.6g}",
        f"  certificate: worst margin {cert.worst_uncertainty_margin:.6g} "
        f"over {cert.n_samples} uncertainty samples",
        f"  certificate constraint residual: {cert.residual_eq_constraint:.3e}",
        "  note: the certificate speaks for the sampled uncertainty set",
    ]
    return "\n".join(lines) + "\n"


def _run_one_mode(payload):
    sc_dict, design_dict, mode = payload
    sc = cfg.scenario_from_dict(sc_dict).with_mode(mode)
    design = cfg.design_from_dict(design_dict)
    log_ = run(sc, design=design)
    return mode, log_


# ------------------------------------------------------------ subcommands

def cmd_scenarios(args) -> int:
    for name in BUILTIN_NAMES:
        sc = builtin_scenario(name)
        act = sc.actuator
        print(f"{name}: n_p={sc.plant.n_p} m={sc.plant.m} "
              f"tau={act.tau} u_max={act.u_max.limits.tolist()} "
              f"u_r_max={act.u_r_max.limits.tolist()} T={sc.T} h={sc.h}")
    return 0


def cmd_design(args) -> int:
    sc = _load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plant_aug, design = _design_for(sc)
    cfg.save_design(design, out / f"{sc.name}_design.json")
    (out / f"{sc.name}_design_report.txt").write_text(
        _design_report_text(sc, plant_aug, design))
    log.info("design written to %s", out)
    print(f"design certified: eps={design.epsilon:.6g} margin="
          f"{design.certificate.worst_uncertainty_margin:.6g}")
    return 0


def _emit_run_outputs(log_, sc, mode, out, emits):
    tag = f"{sc.name}_{mode}"
    if "csv" in emits:
        emit_csv(log_, out / f"{tag}.csv")
    if "svg" in emits:
        sig = log_.signals
        panels = [
            ("regulated output", [("z_cmd", sig["z_cmd"][:, 0]),
                                  ("z", sig["z"][:, 0])]),
            ("surface position", [(f"u_p_{j}", log_.block("u_p")[:, j])
                                  for j in range(log_.layout.m)]),
            ("surface rate", [(f"rate_{j}", sig["u_r_sat"][:, j])
                              for j in range(log_.layout.m)]),
            ("deficiency", [(f"du2_{j}", sig["du2"][:, j])
                            for j in range(log_.layout.m)]),
        ]
        plot_panels(out / f"{tag}.svg", log_.t, panels,
                    title=f"{sc.name} [{mode}]")


def cmd_simulate(args) -> int:
    sc = _load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emits = set(args.emit.split(",")) if args.emit else {"csv"}
    plant_aug, design = _design_for(sc)
    gains = ControllerGains(plant=plant_aug, design=design,
                            gamma_omega=sc.gamma_omega,
                            gamma_omega_delta=sc.gamma_omega_delta)
    cl = assemble_closed_loop(gains)

    modes = list(MODES) if args.mode == "all" else [args.mode]
    logs: dict[str, TrajectoryLog] = {}
    if args.jobs > 1 and len(modes) > 1:
        from concurrent.futures import ProcessPoolExecutor

        sc_dict = cfg.scenario_to_dict(sc)
        design_dict = cfg.design_to_dict(design)
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for mode, log_ in pool.map(
                    _run_one_mode,
                    [(sc_dict, design_dict, mode) for mode in modes]):
                logs[mode] = log_
    else:
        for mode in modes:
            logs[mode] = run(sc.with_mode(mode), design=design)

    for mode, log_ in logs.items():
        attach_closed_loop_diagnostics(log_, cl)
        _emit_run_outputs(log_, sc, mode, out, emits)
        print(f"{mode}: {log_.n_samples} samples, stop={log_.stop_reason}")

    if args.mode == "all":
        ideal = logs["unconstrained"]
        summary = {}
        for mode in ("baseline", "no_du2", "proposed"):
            summary[mode] = integrated_abs_error(logs[mode], ideal)
        lines = ["integrated |z - z_ideal| vs the unconstrained run:"]
        for mode, val in summary.items():
            lines.append(f"  {mode}: {val:.6g}")
        text = "\n".join(lines)
        print(text)
        if "report" in emits:
            (out / f"{sc.name}_comparison.txt").write_text(text + "\n")
    return 0


def cmd_check(args) -> int:
    sc = _load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plant_aug, design = _design_for(sc)
    gains = ControllerGains(plant=plant_aug, design=design,
                            gamma_omega=sc.gamma_omega,
                            gamma_omega_delta=sc.gamma_omega_delta)
    cl = assemble_closed_loop(gains)

    z_cmd_max = args.z_cmd_max if args.z_cmd_max is not None else sc.z_cmd_max
    if args.v0 is not None:
        V0 = args.v0
        chi0 = 0.0
    else:
        ctx = SimContext(sc, design, plant_aug)
        log_ = run(sc, design=design, ctx=ctx)
        attach_closed_loop_diagnostics(log_, cl)
        V0 = float(log_.V[0]) if np.isfinite(log_.V[0]) else 0.0
        chi0 = float(np.linalg.norm(log_.chi[0]))
    report = compute_report(cl, gains, z_cmd_max=z_cmd_max, V0=V0,
                            chi0_norm=chi0)
    cfg.save_report(report, out / f"{sc.name}_stability.json")

    verdicts = {
        "assumption6_ok": report.assumption6_ok,
        "discriminants_ok": report.discriminants_ok,
        "theorem1_condition_i": report.theorem1_condition_i,
        "theorem1_condition_ii": report.theorem1_condition_ii,
    }
    for name, ok in verdicts.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    print(f"chi_min={report.chi_min:.6g} chi_max={report.chi_max:.6g} "
          f"omega_bar_max={report.omega_bar_max:.6g}")
    if args.v0 is None:
        mon = runtime_monitor(log_, cl, report)
        print(f"monitor: {mon.n_violations} decrement violations, "
              f"{mon.n_mixed} mixed-saturation samples, "
              f"chi below bound: {mon.chi_max_satisfied}")
    if not report.discriminants_ok:
        print("negative discriminant: the command bound is too large for "
              "the saturation level and uncertainty")
    return 0 if report.all_ok else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="adaptlim",
        description="adaptive control with input magnitude and rate limits")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("scenarios", help="list builtin scenarios")
    sp.set_defaults(fn=cmd_scenarios)

    for name, fn in (("design", cmd_design), ("simulate", cmd_simulate),
                     ("check", cmd_check)):
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True,
                        help="builtin name or scenario JSON path")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--h", type=float, default=None,
                        help="integration step override")
        sp.add_argument("--T", type=float, default=None,
                        help="horizon override")
        sp.add_argument("--seed", type=int, default=None)
        if name == "simulate":
            sp.add_argument("--mode", default="proposed",
                            choices=list(MODES) + ["all"])
            sp.add_argument("--emit", default="csv",
                            help="comma list of csv,svg,report")
            sp.add_argument("--jobs", type=int, default=1)
        if name == "check":
            sp.add_argument("--z-cmd-max", type=float, default=None)
            sp.add_argument("--v0", type=float, default=None,
                            help="storage-function override (skips the run)")
        sp.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(
        os.environ.get("ADAPTLIM_LOG", "quiet").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - boundary translates to codes
        code = _exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        if log.isEnabledFor(logging.DEBUG):
            raise
        return code


if __name__ == "__main__":
    sys.exit(main())
