"""JSON (de)serialization of scenarios, designs, and reports.

One structured text file per object; matrices are row-major nested arrays
so fixtures stay hand-editable and diff-friendly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .actuator import ActuatorConfig
from .design import ControllerDesign, SprCertificate
from .plant import PlantModel
from .saturation import LimitVector
from .sim import CommandSchedule, Scenario
from .stability import StabilityReport

__all__ = [
    "scenario_to_dict", "scenario_from_dict", "load_scenario", "save_scenario",
    "design_to_dict", "design_from_dict", "save_design", "load_design",
    "report_to_dict", "save_report",
]


def _arr(x):
    return np.asarray(x, dtype=float).tolist()


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def scenario_to_dict(sc: Scenario) -> dict:
    cmd: dict = {"kind": sc.command.kind, "n_z": sc.command.n_z}
    if sc.command.kind == "steps":
        cmd["times"] = _arr(sc.command.times)
        cmd["values"] = _arr(sc.command.values)
    elif sc.command.kind == "sine":
        cmd["amplitude"] = sc.command.amplitude
        cmd["period"] = sc.command.period
    p = sc.plant
    out = {
        "name": sc.name,
        "plant": {
            "A_p": _arr(p.A_p), "B_p": _arr(p.B_p), "C_p": _arr(p.C_p),
            "C_pz": _arr(p.C_pz), "D_pz": _arr(p.D_pz),
            "Lambda_star": _arr(p.Lambda_star),
            "Theta_p_star": _arr(p.Theta_p_star),
            "Theta_p_max": p.Theta_p_max, "Lambda_max": p.Lambda_max,
            "Lambda_inv_max": p.Lambda_inv_max,
        },
        "actuator": {
            "tau": sc.actuator.tau,
            "u_max": _arr(sc.actuator.u_max.limits),
            "u_r_max": _arr(sc.actuator.u_r_max.limits),
        },
        "command": cmd,
        "sim": {"T": sc.T, "h": sc.h, "mode": sc.mode,
                "log_every": sc.log_every},
        "design": {
            "Q_lqr": _arr(sc.Q_lqr), "R_lqr": _arr(sc.R_lqr),
            "a1_1": sc.a1_1, "a1_0": sc.a1_0,
            "gamma_omega": sc.gamma_omega,
            "gamma_omega_delta": sc.gamma_omega_delta,
            "eps_start": sc.eps_start, "eps_cap": sc.eps_cap,
            "n_uncertainty_samples": sc.n_uncertainty_samples,
            "seed": sc.seed,
        },
        "z_cmd_max": sc.z_cmd_max,
        "omega0": sc.omega0 if isinstance(sc.omega0, str) else _arr(sc.omega0),
        "omega_delta0": (sc.omega_delta0 if isinstance(sc.omega_delta0, str)
                         else _arr(sc.omega_delta0)),
    }
    if sc.x_p0 is not None:
        out["x_p0"] = _arr(sc.x_p0)
    if math.isfinite(sc.norm_stop):
        out["sim"]["norm_stop"] = sc.norm_stop
    return out


def scenario_from_dict(d: dict) -> Scenario:
    p = d["plant"]
    plant = PlantModel(
        A_p=p["A_p"], B_p=p["B_p"], C_p=p["C_p"], C_pz=p["C_pz"],
        D_pz=p["D_pz"], Lambda_star=p["Lambda_star"],
        Theta_p_star=p["Theta_p_star"], Theta_p_max=p["Theta_p_max"],
        Lambda_max=p["Lambda_max"], Lambda_inv_max=p["Lambda_inv_max"])
    a = d["actuator"]
    actuator = ActuatorConfig(tau=a["tau"], u_max=LimitVector(a["u_max"]),
                              u_r_max=LimitVector(a["u_r_max"]))
    c = d["command"]
    if c["kind"] == "steps":
        command = CommandSchedule.steps(times=c["times"], values=c["values"])
    elif c["kind"] == "sine":
        command = CommandSchedule(kind="sine", amplitude=c["amplitude"],
                                  period=c["period"], n_z=c.get("n_z", 1))
    else:
        command = CommandSchedule.zero(n_z=c.get("n_z", 1))
    s = d["sim"]
    g = d["design"]
    omega0 = d.get("omega0", "baseline")
    if not isinstance(omega0, str):
        omega0 = np.asarray(omega0, dtype=float)
    omega_delta0 = d.get("omega_delta0", "zero")
    if not isinstance(omega_delta0, str):
        omega_delta0 = np.asarray(omega_delta0, dtype=float)
    return Scenario(
        name=d["name"], plant=plant, actuator=actuator, command=command,
        T=s["T"], h=s["h"], mode=s.get("mode", "proposed"),
        log_every=s.get("log_every", 1),
        norm_stop=s.get("norm_stop", float("inf")),
        Q_lqr=np.asarray(g["Q_lqr"]), R_lqr=np.asarray(g["R_lqr"]),
        a1_1=g["a1_1"], a1_0=g["a1_0"],
        gamma_omega=g["gamma_omega"], gamma_omega_delta=g["gamma_omega_delta"],
        eps_start=g.get("eps_start", 1e-2), eps_cap=g.get("eps_cap", 1e7),
        n_uncertainty_samples=g.get("n_uncertainty_samples", 8),
        seed=g.get("seed", 20260810),
        z_cmd_max=d.get("z_cmd_max"),
        x_p0=np.asarray(d["x_p0"], dtype=float) if "x_p0" in d else None,
        omega0=omega0, omega_delta0=omega_delta0)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def load_scenario(ref) -> Scenario:
    """Scenario from a builtin name or a JSON file path."""
    from .scenarios import BUILTIN_NAMES, builtin_scenario

    if isinstance(ref, Scenario):
        return ref
    ref = str(ref)
    if ref in BUILTIN_NAMES:
        return builtin_scenario(ref)
    path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(
            f"scenario {ref!r} is neither a builtin {BUILTIN_NAMES} nor a file")
    return scenario_from_dict(json.loads(path.read_text()))


def design_to_dict(design: ControllerDesign) -> dict:
    cert = design.certificate
    return {
        "K": _arr(design.K), "a1_1": design.a1_1, "a1_0": design.a1_0,
        "B_s1": _arr(design.B_s1), "B2_1": _arr(design.B2_1),
        "Bbar2_1": _arr(design.Bbar2_1), "S": _arr(design.S),
        "S2": _arr(design.S2), "S1": _arr(design.S1), "L": _arr(design.L),
        "epsilon": design.epsilon,
        "certificate": {
            "P": _arr(cert.P), "Q": _arr(cert.Q),
            "residual_eq_constraint": cert.residual_eq_constraint,
            "worst_uncertainty_margin": cert.worst_uncertainty_margin,
            "n_samples": cert.n_samples,
        },
    }


def design_from_dict(d: dict) -> ControllerDesign:
    c = d["certificate"]
    cert = SprCertificate(
        P=np.asarray(c["P"]), Q=np.asarray(c["Q"]),
        residual_eq_constraint=c["residual_eq_constraint"],
        worst_uncertainty_margin=c["worst_uncertainty_margin"],
        n_samples=c.get("n_samples", 0))
    def arr2(key):
        a = np.asarray(d[key], dtype=float)
        return a if a.ndim == 2 else a.reshape(len(a), -1)
    return ControllerDesign(
        K=arr2("K"), a1_1=d["a1_1"], a1_0=d["a1_0"],
        B_s1=np.asarray(d["B_s1"], dtype=float).reshape(len(d["B_s1"]), -1),
        B2_1=arr2("B2_1"), Bbar2_1=arr2("Bbar2_1"), S=arr2("S"),
        S2=arr2("S2"), S1=arr2("S1"), L=arr2("L"),
        epsilon=d["epsilon"], certificate=cert)


def save_design(design: ControllerDesign, path) -> None:
    Path(path).write_text(json.dumps(design_to_dict(design), indent=2) + "\n")


def load_design(path) -> ControllerDesign:
    return design_from_dict(json.loads(Path(path).read_text()))


def report_to_dict(report: StabilityReport) -> dict:
    out = {}
    for key, val in vars(report).items():
        if key == "kappa":
            out["kappa"] = {str(k): _num(v) for k, v in val.items()}
        elif isinstance(val, bool):
            out[key] = val
        elif isinstance(val, (int, float)):
            out[key] = _num(val)
        else:
            out[key] = val
    out["all_ok"] = report.all_ok
    return out


def save_report(report: StabilityReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
