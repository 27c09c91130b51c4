"""Shared fixtures: designed gain sets and canned closed-loop runs.

Everything heavy is session-scoped so the suite designs each gain set and
integrates each trajectory exactly once.
"""

import warnings
from dataclasses import replace

import numpy as np
import pytest

from adaptlim.actuator import ActuatorConfig
from adaptlim.controller import ControllerGains, truth_companions
from adaptlim.design import design_controller
from adaptlim.plant import PlantModel, augment
from adaptlim.saturation import LimitVector
from adaptlim.scenarios import builtin_scenario
from adaptlim.sim import CommandSchedule, Scenario, SimContext, run
from adaptlim.stability import (
    assemble_closed_loop,
    attach_closed_loop_diagnostics,
    compute_report,
)

warnings.filterwarnings("ignore", category=RuntimeWarning)


def design_for(scenario):
    aug = augment(scenario.plant, scenario.actuator)
    design = design_controller(
        aug, scenario.Q_lqr, scenario.R_lqr, a1_1=scenario.a1_1,
        a1_0=scenario.a1_0, eps_start=scenario.eps_start,
        eps_cap=scenario.eps_cap,
        n_random_samples=scenario.n_uncertainty_samples, seed=scenario.seed)
    return aug, design


def run_mode(scenario, aug, design, mode, **overrides):
    sc = replace(scenario.with_mode(mode), **overrides)
    return run(sc, design=design, ctx=SimContext(sc, design, aug))


@pytest.fixture(scope="session")
def longitudinal_setup():
    sc = builtin_scenario("longitudinal")
    aug, design = design_for(sc)
    return sc, aug, design


@pytest.fixture(scope="session")
def lateral_setup():
    sc = builtin_scenario("lateral")
    aug, design = design_for(sc)
    return sc, aug, design


@pytest.fixture(scope="session")
def hypersonic_setup():
    sc = builtin_scenario("hypersonic")
    aug, design = design_for(sc)
    return sc, aug, design


@pytest.fixture(scope="session")
def longitudinal_logs(longitudinal_setup):
    sc, aug, design = longitudinal_setup
    return {mode: run_mode(sc, aug, design, mode)
            for mode in ("baseline", "unconstrained", "no_du2", "proposed")}


@pytest.fixture(scope="session")
def lateral_logs(lateral_setup):
    sc, aug, design = lateral_setup
    return {mode: run_mode(sc, aug, design, mode)
            for mode in ("unconstrained", "proposed")}


@pytest.fixture(scope="session")
def hypersonic_runs(hypersonic_setup):
    sc, aug, design = hypersonic_setup
    proposed = run_mode(sc, aug, design, "proposed")
    no_du2 = run_mode(sc, aug, design, "no_du2", norm_stop=1e4)
    return {"proposed": proposed, "no_du2": no_du2}


# ------------------------------------------------------- special fixtures

def uncertain_half_effectiveness_plant():
    """Longitudinal airframe with 50% effectiveness loss and matched drift."""
    base = builtin_scenario("longitudinal").plant
    return PlantModel(
        A_p=base.A_p, B_p=base.B_p, C_p=base.C_p, C_pz=base.C_pz,
        D_pz=base.D_pz, Lambda_star=[[0.5]],
        Theta_p_star=base.Theta_p_star,
        Theta_p_max=3.0, Lambda_max=1.5, Lambda_inv_max=3.0)


def tracking_scenario():
    """No uncertainty, limits far away, fast reference poles, long segments."""
    base = builtin_scenario("longitudinal")
    plant = PlantModel(
        A_p=base.plant.A_p, B_p=base.plant.B_p, C_p=base.plant.C_p,
        C_pz=base.plant.C_pz, D_pz=base.plant.D_pz,
        Lambda_star=[[1.0]], Theta_p_star=[[0.0], [0.0]],
        Theta_p_max=0.5, Lambda_max=1.5, Lambda_inv_max=1.5)
    act = ActuatorConfig(tau=0.0495, u_max=LimitVector([2500.0]),
                         u_r_max=LimitVector([6000.0]))
    cmd = CommandSchedule.steps(times=[0.0, 10.0, 20.0],
                                values=[[3.0], [-2.0], [1.0]])
    return Scenario(
        name="tracking", plant=plant, actuator=act, command=cmd,
        T=30.0, h=1e-3, Q_lqr=np.diag([1.0, 1.0, 1.0, 100.0]),
        R_lqr=np.array([[0.1]]), gamma_omega=50.0, gamma_omega_delta=10.0,
        mode="proposed")


@pytest.fixture(scope="session")
def tracking_run():
    sc = tracking_scenario()
    aug, design = design_for(sc)
    return sc, run(sc, design=design, ctx=SimContext(sc, design, aug))


def sweep_scenario(factor: float):
    """Saturation-severity sweep: known effectiveness estimate, no matched
    uncertainty, limits scaled by ``factor`` from a deliberately tight base."""
    base = builtin_scenario("longitudinal")
    plant = PlantModel(
        A_p=base.plant.A_p, B_p=base.plant.B_p, C_p=base.plant.C_p,
        C_pz=base.plant.C_pz, D_pz=base.plant.D_pz,
        Lambda_star=[[0.4]], Theta_p_star=[[0.0], [0.0]],
        Theta_p_max=0.2, Lambda_max=1.5, Lambda_inv_max=3.0)
    act = ActuatorConfig(tau=0.0495, u_max=LimitVector([8.0]),
                         u_r_max=LimitVector([25.0])).relaxed(factor)
    cmd = CommandSchedule.steps(
        times=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        values=[[6.0], [-6.0], [6.0], [-6.0], [6.0], [0.0]])
    return Scenario(
        name=f"sweep_{factor:g}", plant=plant, actuator=act, command=cmd,
        T=12.0, h=5e-4, log_every=2, Q_lqr=base.Q_lqr, R_lqr=base.R_lqr,
        gamma_omega=20.0, gamma_omega_delta=4.0, mode="proposed",
        omega0="truth")


SWEEP_FACTORS = (1.0, 2.0, 4.0, 8.0, 1e9)


@pytest.fixture(scope="session")
def sweep_runs():
    sc0 = sweep_scenario(1.0)
    aug0, design = design_for(sc0)
    out = {}
    for factor in SWEEP_FACTORS:
        sc = sweep_scenario(factor)
        aug = augment(sc.plant, sc.actuator)
        out[factor] = run(sc, design=design, ctx=SimContext(sc, design, aug))
    return out


def roa_scenario():
    """Stable fixture under a vanishingly small command, initialized near
    the truth companions; sized so every boundedness verdict passes."""
    plant = PlantModel(
        A_p=[[-1.0, 0.9], [0.8, -1.1]], B_p=[[0.0], [-2.2]],
        C_p=[[0.0, 1.0]], C_pz=[[0.0, 1.0]], D_pz=[[0.0]],
        Lambda_star=[[0.8]], Theta_p_star=[[0.1], [-0.1]],
        Theta_p_max=0.3, Lambda_max=1.2, Lambda_inv_max=1.6)
    act = ActuatorConfig(tau=0.2, u_max=LimitVector([25.0]),
                         u_r_max=LimitVector([60.0]))
    amp = 2e-8
    cmd = CommandSchedule.steps(times=[0.0, 4.0, 8.0],
                                values=[[amp], [-amp], [0.0]])
    return Scenario(
        name="roa_check", plant=plant, actuator=act, command=cmd,
        T=12.0, h=1e-3, Q_lqr=np.diag([1.0, 1.0, 1.0, 10.0]),
        R_lqr=np.array([[1.0]]), gamma_omega=5.0, gamma_omega_delta=2.0,
        mode="proposed", z_cmd_max=2.5e-8, omega_delta0="truth")


@pytest.fixture(scope="session")
def roa_setup():
    sc = roa_scenario()
    aug, design = design_for(sc)
    om_star, _ = truth_companions(aug, design)
    offset = np.ones((9, 1))
    offset /= np.linalg.norm(offset)
    sc = replace(sc, omega0=om_star + 1.5e-3 * offset)
    gains = ControllerGains(plant=aug, design=design,
                            gamma_omega=sc.gamma_omega,
                            gamma_omega_delta=sc.gamma_omega_delta)
    cl = assemble_closed_loop(gains)
    log = run(sc, design=design, ctx=SimContext(sc, design, aug))
    attach_closed_loop_diagnostics(log, cl)
    report = compute_report(cl, gains, z_cmd_max=sc.z_cmd_max,
                            V0=float(log.V[0]),
                            chi0_norm=float(np.linalg.norm(log.chi[0])))
    return sc, aug, design, gains, cl, log, report


def residual_scenario(T=5.0, h=1e-5):
    """Half-effectiveness uncertain fixture for the error-model residual."""
    base = builtin_scenario("longitudinal")
    plant = uncertain_half_effectiveness_plant()
    cmd = CommandSchedule.steps(times=[0.0, 2.0, 4.0],
                                values=[[8.0], [-8.0], [8.0]])
    return Scenario(
        name="residual", plant=plant, actuator=base.actuator, command=cmd,
        T=T, h=h, log_every=1, Q_lqr=base.Q_lqr, R_lqr=base.R_lqr,
        gamma_omega=50.0, gamma_omega_delta=10.0, mode="proposed")
