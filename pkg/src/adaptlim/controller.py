"""Online adaptive controller: reference model, filters, control law,
auxiliary saturation system, and the update laws.

All operations are pure functions of (state, inputs) returning derivatives;
the integrator owns mutation.  The control law realizes the filtered-
regressor structure with the parameter derivative synthesized in place, so
no signal is ever differentiated numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import ControllerDesign
from .plant import AugmentedPlant

__all__ = [
    "ControllerGains",
    "ControllerState",
    "ErrorSignals",
    "crm_derivative",
    "filter_states_derivative",
    "regressor",
    "regressor_delta",
    "control_output",
    "auxiliary_derivative",
    "update_laws",
    "truth_companions",
    "baseline_parameters",
    "error_signals",
    "modified_tracking_error",
    "modified_auxiliary_error",
    "lyapunov_value",
]


@dataclass(frozen=True)
class ControllerGains:
    """Design gains plus adaptation rates, with hot-path matrices precomputed."""

    plant: AugmentedPlant
    design: ControllerDesign
    gamma_omega: float
    gamma_omega_delta: float
    omega_norm_cap: float | None = None
    A_m: np.ndarray = field(init=False)
    A_L: np.ndarray = field(init=False)
    L_C: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.gamma_omega < 0.0 or self.gamma_omega_delta < 0.0:
            raise ValueError("adaptation gains must be nonnegative")
        A, B2, C = self.plant.A, self.plant.B2, self.plant.C
        object.__setattr__(self, "A_m", A - B2 @ self.design.K)
        object.__setattr__(self, "L_C", self.design.L @ C)
        object.__setattr__(self, "A_L", A - self.design.L @ C)

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def m(self) -> int:
        return self.plant.m

    @property
    def n_regressor(self) -> int:
        return self.m + 2 * self.n


@dataclass
class ControllerState:
    """All online integrator states of the controller."""

    x_m: np.ndarray
    Omega: np.ndarray
    Omega_Delta: np.ndarray
    e_Delta: np.ndarray
    ubar_bl: np.ndarray
    du2bar: np.ndarray
    xbar_m: np.ndarray
    ebar_Delta: np.ndarray

    @classmethod
    def zeros(cls, gains: ControllerGains,
              Omega0: np.ndarray | None = None) -> "ControllerState":
        n, m, k = gains.n, gains.m, gains.n_regressor
        Omega = np.zeros((k, m)) if Omega0 is None else np.array(Omega0, dtype=float)
        if Omega.shape != (k, m):
            raise ValueError(f"Omega must be {(k, m)}, got {Omega.shape}")
        return cls(x_m=np.zeros(n), Omega=Omega, Omega_Delta=np.zeros((k, m)),
                   e_Delta=np.zeros(n), ubar_bl=np.zeros(m), du2bar=np.zeros(m),
                   xbar_m=np.zeros(n), ebar_Delta=np.zeros(n))


@dataclass(frozen=True)
class ErrorSignals:
    """Measured output error, its auxiliary correction, and the augmented error."""

    e_y: np.ndarray
    e_y_delta: np.ndarray
    e_y_u: np.ndarray


def error_signals(gains: ControllerGains, y: np.ndarray, x_m: np.ndarray,
                  e_Delta: np.ndarray) -> ErrorSignals:
    C = gains.plant.C
    e_y = y - C @ x_m
    e_y_delta = C @ e_Delta
    return ErrorSignals(e_y=e_y, e_y_delta=e_y_delta, e_y_u=e_y - e_y_delta)


def crm_derivative(gains: ControllerGains, x_m: np.ndarray, y: np.ndarray,
                   z_cmd: np.ndarray):
    """Reference-model derivative with output-error injection.

    Returns (xm_dot, y_m, z_m, u_bl).  With y == y_m this collapses to the
    open-loop reference model driven by the command alone.
    """
    plant = gains.plant
    u_bl = -(gains.design.K @ x_m)
    y_m = plant.C @ x_m
    xm_dot = gains.A_m @ x_m + gains.design.L @ (y - y_m) + plant.Bz @ z_cmd
    z_m = plant.Cz @ x_m + plant.plant.D_pz @ u_bl
    return xm_dot, y_m, z_m, u_bl


def filter_states_derivative(gains: ControllerGains, ubar_bl, du2bar, xbar_m,
                             ebar_Delta, u_bl, du2, x_m, e_Delta):
    """First-order filter bank: a1_1 * w' = -a1_0 * w + input, per signal."""
    a1, a0 = gains.design.a1_1, gains.design.a1_0
    return ((u_bl - a0 * ubar_bl) / a1,
            (du2 - a0 * du2bar) / a1,
            (x_m - a0 * xbar_m) / a1,
            (e_Delta - a0 * ebar_Delta) / a1)


def regressor(ubar_bl: np.ndarray, x_m: np.ndarray, xbar_m: np.ndarray) -> np.ndarray:
    return np.concatenate([ubar_bl, -x_m, -xbar_m])


def regressor_delta(du2bar: np.ndarray, e_Delta: np.ndarray,
                    ebar_Delta: np.ndarray) -> np.ndarray:
    return np.concatenate([du2bar, e_Delta, ebar_Delta])


def update_laws(gains: ControllerGains, xi_bar: np.ndarray,
                xi_delta: np.ndarray, e_y_u: np.ndarray,
                Omega: np.ndarray | None = None):
    """Gradient updates driven by the augmented output error.

    Omega moves against the error outer product, Omega_Delta with it (the
    signs differ by construction of the augmented error).  When a norm cap
    is configured and Omega sits on the ball moving outward, the radial
    component of its derivative is removed.
    """
    s2e = gains.design.S2 @ e_y_u
    omega_dot = -gains.gamma_omega * np.outer(xi_bar, s2e)
    omega_delta_dot = gains.gamma_omega_delta * np.outer(xi_delta, s2e)
    cap = gains.omega_norm_cap
    if cap is not None and Omega is not None:
        nrm2 = float(np.sum(Omega * Omega))
        if nrm2 >= cap * cap:
            radial = float(np.sum(Omega * omega_dot))
            if radial > 0.0:
                omega_dot = omega_dot - Omega * (radial / nrm2)
    return omega_dot, omega_delta_dot


def control_output(gains: ControllerGains, Omega: np.ndarray,
                   omega_dot: np.ndarray, xi_bar: np.ndarray,
                   u_bl: np.ndarray, x_m: np.ndarray,
                   xm_dot: np.ndarray) -> np.ndarray:
    """Computed control: the zero-placement operator applied to Omega' xi.

    The operator image of each regressor block is available exactly from
    filter algebra (the filtered signals invert it; the reference-model
    block uses the already-evaluated xm_dot), and the product rule supplies
    the parameter-rate term.
    """
    a1, a0 = gains.design.a1_1, gains.design.a1_0
    v = np.concatenate([u_bl, -(a1 * xm_dot + a0 * x_m), -x_m])
    return Omega.T @ v + a1 * (omega_dot.T @ xi_bar)


def auxiliary_derivative(gains: ControllerGains, e_Delta: np.ndarray,
                         Omega_Delta: np.ndarray,
                         xi_delta: np.ndarray) -> np.ndarray:
    """Saturation companion system; quiescent until a limit activates."""
    return gains.A_L @ e_Delta + gains.design.B2_1 @ (Omega_Delta.T @ xi_delta)


def truth_companions(plant: AugmentedPlant, design: ControllerDesign):
    """Exact parameter matrices realized by the true uncertainty.

    Simulation-only: used to form parameter errors and the Lyapunov value.
    Returns (Omega_star, Omega_Delta_star).
    """
    n, m, n_p = plant.n, plant.m, plant.plant.n_p
    Lam = plant.plant.Lambda_star
    Theta = plant.plant.Theta_p_star
    tau, a1, a0 = plant.tau, design.a1_1, design.a1_0
    psi1_bar = np.zeros((n, m))
    psi1_bar[:n_p, :] = (tau / a1) * Theta
    psi2_bar = np.zeros((n, m))
    psi2_bar[:n_p, :] = (1.0 - tau * a0 / a1) * Theta
    lam_inv = np.diag(1.0 / np.diag(Lam))
    omega_star = np.vstack([lam_inv, psi1_bar, psi2_bar])
    omega_delta_star = np.vstack([Lam, psi1_bar @ Lam, psi2_bar @ Lam])
    return omega_star, omega_delta_star


def baseline_parameters(plant: AugmentedPlant) -> np.ndarray:
    """Parameter matrix reproducing the pure reference-model input.

    Unit effectiveness estimate, zero matched-uncertainty blocks; with
    adaptation off this makes the computed control equal the reference
    input exactly.
    """
    n, m = plant.n, plant.m
    return np.vstack([np.eye(m), np.zeros((2 * n, m))])


def modified_tracking_error(gains: ControllerGains, x: np.ndarray,
                            state: ControllerState) -> np.ndarray:
    """Truth-aware coordinate shift removing the differentiator from the
    tracking-error dynamics (diagnostic reconstruction)."""
    plant = gains.plant
    Lam = plant.plant.Lambda_star
    _, psi2_bar = _truth_bars(gains)
    xi = regressor(state.ubar_bl, state.x_m, state.xbar_m)
    lam_inv = np.diag(1.0 / np.diag(Lam))
    bracket = (psi2_bar.T @ state.xbar_m + state.Omega.T @ xi
               - lam_inv @ state.ubar_bl + state.du2bar)
    e_x = x - state.x_m
    return e_x - plant.B2 @ (Lam @ bracket) * gains.design.a1_1


def modified_auxiliary_error(gains: ControllerGains,
                             state: ControllerState) -> np.ndarray:
    """Truth-aware companion shift for the auxiliary system (diagnostic)."""
    plant = gains.plant
    Lam = plant.plant.Lambda_star
    _, psi2_bar = _truth_bars(gains)
    return state.e_Delta + plant.B2 @ (Lam @ (psi2_bar.T @ state.ebar_Delta)) \
        * gains.design.a1_1


def _truth_bars(gains: ControllerGains):
    plant, design = gains.plant, gains.design
    n, m, n_p = plant.n, plant.m, plant.plant.n_p
    Theta = plant.plant.Theta_p_star
    tau, a1, a0 = plant.tau, design.a1_1, design.a1_0
    psi1_bar = np.zeros((n, m))
    psi1_bar[:n_p, :] = (tau / a1) * Theta
    psi2_bar = np.zeros((n, m))
    psi2_bar[:n_p, :] = (1.0 - tau * a0 / a1) * Theta
    return psi1_bar, psi2_bar


def lyapunov_value(gains: ControllerGains, x: np.ndarray,
                   state: ControllerState) -> float:
    """Truth-aware storage function: augmented-error energy plus weighted
    parameter-error traces.  Undefined (NaN) when adaptation is off."""
    if gains.gamma_omega <= 0.0 or gains.gamma_omega_delta <= 0.0:
        return float("nan")
    plant, design = gains.plant, gains.design
    omega_star, omega_delta_star = truth_companions(plant, design)
    e_mu = modified_tracking_error(gains, x, state) \
        - modified_auxiliary_error(gains, state)
    P = design.certificate.P
    ot = state.Omega - omega_star
    otd = state.Omega_Delta - omega_delta_star
    Lam = plant.plant.Lambda_star
    v = float(e_mu @ P @ e_mu)
    v += float(np.trace(ot.T @ ot @ np.abs(Lam))) / gains.gamma_omega
    v += float(np.trace(otd.T @ otd)) / gains.gamma_omega_delta
    return v
