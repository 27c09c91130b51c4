"""Built-in desk-scale scenarios.

The actuator lag and limit values follow published flight-test-style
numbers (elevator, aileron/rudder, and a faster high-speed elevator); the
airframe blocks are small linear fixtures with documented poles standing
in for the full nonlinear vehicle models, whose aerodynamic tables are not
part of this library.  Uncertainties encode moment-coefficient losses as
control-effectiveness scalings plus matched corrections of the affected
rows.
"""

from __future__ import annotations

import numpy as np

from .actuator import ActuatorConfig
from .plant import PlantModel
from .saturation import LimitVector
from .sim import CommandSchedule, Scenario

__all__ = ["builtin_scenarios", "builtin_scenario", "BUILTIN_NAMES"]

BUILTIN_NAMES = ("longitudinal", "lateral", "hypersonic")


def _longitudinal() -> Scenario:
    """Stable pitch-axis fixture (poles -0.2, -1.9; measurement zero at -1)
    with a 75% loss of pitching-moment effectiveness.

    The moment row of the true dynamics is the nominal one scaled by 0.25:
    the input scaling carries the surface-effectiveness share and the
    matched parameters carry the stability-derivative share.
    """
    A_p = [[-1.0, 0.9], [0.8, -1.1]]
    B_p = [[0.0], [-2.2]]
    lam = 0.25
    # B_p * lam * theta' must equal the moment-row change (-0.75 * row)
    theta = [[-0.75 * 0.8 / (lam * -2.2)], [-0.75 * -1.1 / (lam * -2.2)]]
    plant = PlantModel(
        A_p=A_p, B_p=B_p, C_p=[[0.0, 1.0]], C_pz=[[0.0, 1.0]], D_pz=[[0.0]],
        Lambda_star=[[lam]], Theta_p_star=theta,
        Theta_p_max=3.0, Lambda_max=1.5, Lambda_inv_max=5.0)
    actuator = ActuatorConfig(tau=0.0495, u_max=LimitVector([25.0]),
                              u_r_max=LimitVector([60.0]))
    command = CommandSchedule.steps(
        times=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        values=[[8.0], [-8.0], [8.0], [-8.0], [8.0], [-8.0], [0.0]])
    return Scenario(
        name="longitudinal", plant=plant, actuator=actuator, command=command,
        T=14.0, h=1e-3,
        Q_lqr=np.diag([1.0, 1.0, 1.0, 10.0]), R_lqr=np.array([[1.0]]),
        gamma_omega=50.0, gamma_omega_delta=10.0)


def _lateral() -> Scenario:
    """Stable roll/yaw fixture (two inputs, roll-rate regulation) with a
    50% loss of rolling-moment effectiveness on the first input channel."""
    A_p = np.array([[-0.35, 0.06, -0.99],
                    [-5.5, -1.2, 0.95],
                    [2.0, -0.03, -0.6]])
    B_p = np.array([[0.0, 0.05],
                    [-8.0, 1.2],
                    [-0.4, -3.0]])
    lam = np.diag([0.5, 1.0])
    # roll-moment row halved; solve B_p[1:, :] @ lam @ theta' = delta rows
    delta = np.array([[2.75, 0.6, -0.475], [0.0, 0.0, 0.0]])
    M = B_p[1:, :] @ lam
    theta = np.linalg.solve(M, delta).T
    plant = PlantModel(
        A_p=A_p, B_p=B_p,
        C_p=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        C_pz=[[0.0, 1.0, 0.0]], D_pz=[[0.0, 0.0]],
        Lambda_star=lam, Theta_p_star=theta,
        Theta_p_max=1.2, Lambda_max=1.5, Lambda_inv_max=2.5)
    actuator = ActuatorConfig(tau=0.0495,
                              u_max=LimitVector([21.5, 30.0]),
                              u_r_max=LimitVector([80.0, 120.0]))
    command = CommandSchedule.steps(
        times=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        values=[[15.0], [-15.0], [15.0], [-15.0], [15.0], [-15.0], [0.0]])
    # the observer loop is stiff (fast eigenvalue near -3.5e3), so this
    # scenario integrates at a quarter of the usual step
    return Scenario(
        name="lateral", plant=plant, actuator=actuator, command=command,
        T=14.0, h=2.5e-4, log_every=4,
        Q_lqr=np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 10.0]),
        R_lqr=np.eye(2),
        gamma_omega=20.0, gamma_omega_delta=5.0)


def _hypersonic() -> Scenario:
    """Open-loop unstable pitch fixture (saddle, poles about +1.47/-2.57)
    with a 50% control-effectiveness loss and a destabilizing matched
    moment increment standing in for an aft center-of-gravity shift."""
    A_p = [[-0.8, 1.0], [4.0, -0.3]]
    B_p = [[0.0], [-3.0]]
    plant = PlantModel(
        A_p=A_p, B_p=B_p, C_p=[[0.0, 1.0]], C_pz=[[0.0, 1.0]], D_pz=[[0.0]],
        Lambda_star=[[0.5]], Theta_p_star=[[-0.4], [0.0]],
        Theta_p_max=1.0, Lambda_max=1.5, Lambda_inv_max=3.0)
    actuator = ActuatorConfig(tau=0.02, u_max=LimitVector([30.0]),
                              u_r_max=LimitVector([100.0]))
    command = CommandSchedule.steps(
        times=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0],
        values=[[10.0], [2.0], [10.0], [2.0], [10.0], [2.0], [10.0], [2.0],
                [10.0], [2.0]])
    # aggressive adaptation plus deep saturation: the parameter-rate
    # feedthrough in the control law makes the loop stiff, so this scenario
    # integrates at a tenth of the usual step
    return Scenario(
        name="hypersonic", plant=plant, actuator=actuator, command=command,
        T=20.0, h=1e-4, log_every=10,
        Q_lqr=np.diag([1.0, 1.0, 1.0, 10.0]), R_lqr=np.array([[1.0]]),
        gamma_omega=120.0, gamma_omega_delta=20.0)


_BUILDERS = {
    "longitudinal": _longitudinal,
    "lateral": _lateral,
    "hypersonic": _hypersonic,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; "
                       f"choose from {BUILTIN_NAMES}") from None


def builtin_scenarios() -> list[Scenario]:
    """The three built-in scenarios, freshly constructed."""
    return [builtin_scenario(name) for name in BUILTIN_NAMES]
