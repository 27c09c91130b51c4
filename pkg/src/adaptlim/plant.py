"""Plant models and the augmentation with integral tracking and the limiter lag.

The raw plant carries the true (simulation-only) uncertainty: a diagonal
control-effectiveness scaling and a matched parameter matrix entering
through the input columns.  Augmentation stacks the plant state, the lag
state w_u and the tracking integrator into one extended system whose
computed-control path has uniform relative degree two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actuator import ActuatorConfig
from .errors import AssumptionViolation, RelativeDegreeMismatch
from .linalg import (
    StateSpace,
    input_relative_degree,
    is_controllable,
    is_observable,
    transmission_zeros,
)

__all__ = ["PlantModel", "AugmentedPlant", "augment", "true_dynamics"]


def _mat(M, name, shape=None):
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if shape is not None and A.shape != shape:
        raise ValueError(f"{name} has shape {A.shape}, expected {shape}")
    return A


@dataclass(frozen=True)
class PlantModel:
    """Raw plant with true uncertainty and its known norm bounds.

    Dynamics: x_p' = A_p x_p + B_p Lambda (u_p + Theta' x_p), y_p = C_p x_p,
    z = C_pz x_p + D_pz Lambda (u_p + Theta' x_p).  Construction validates
    the standing assumptions: (1) minimality of {A_p, B_p, C_p}; (2) stable
    transmission zeros of {A_p, B_p, C_p} and {A_p, B_p, C_pz, D_pz};
    (3) uniform relative degree one; (4) ||Theta|| < theta_max;
    (5) Lambda diagonal positive with ||Lambda|| < lambda_max and
    ||Lambda^-1|| < lambda_inv_max.
    """

    A_p: np.ndarray
    B_p: np.ndarray
    C_p: np.ndarray
    C_pz: np.ndarray
    D_pz: np.ndarray
    Lambda_star: np.ndarray
    Theta_p_star: np.ndarray
    Theta_p_max: float
    Lambda_max: float
    Lambda_inv_max: float

    def __post_init__(self):
        A_p = _mat(self.A_p, "A_p")
        n_p = A_p.shape[0]
        if A_p.shape[1] != n_p:
            raise ValueError("A_p must be square")
        B_p = _mat(self.B_p, "B_p")
        m = B_p.shape[1]
        C_p = _mat(self.C_p, "C_p")
        C_pz = _mat(self.C_pz, "C_pz")
        D_pz = _mat(self.D_pz, "D_pz", (C_pz.shape[0], m))
        Lam = _mat(self.Lambda_star, "Lambda_star", (m, m))
        Theta = _mat(self.Theta_p_star, "Theta_p_star", (n_p, m))
        for name, val in (("A_p", A_p), ("B_p", B_p), ("C_p", C_p),
                          ("C_pz", C_pz), ("D_pz", D_pz),
                          ("Lambda_star", Lam), ("Theta_p_star", Theta)):
            object.__setattr__(self, name, val)
        self._check_assumptions()

    def _check_assumptions(self):
        A_p, B_p, C_p = self.A_p, self.B_p, self.C_p
        if not is_controllable(A_p, B_p):
            raise AssumptionViolation(1, "(A_p, B_p) is not controllable")
        if not is_observable(A_p, C_p):
            raise AssumptionViolation(1, "(A_p, C_p) is not observable")
        zs_y = transmission_zeros(StateSpace(A_p, B_p, C_p))
        if not zs_y.all_stable:
            raise AssumptionViolation(
                2, f"measurement path has unstable zeros {zs_y.zeros}")
        zs_z = transmission_zeros(StateSpace(A_p, B_p, self.C_pz, self.D_pz))
        if not zs_z.all_stable:
            raise AssumptionViolation(
                2, f"regulated path has unstable zeros {zs_z.zeros}")
        rd = input_relative_degree(StateSpace(A_p, B_p, C_p))
        if rd.uniform != 1:
            raise AssumptionViolation(
                3, f"relative degree {rd.per_input} is not uniformly one")
        tnorm = np.linalg.norm(self.Theta_p_star, 2)
        if not (tnorm < self.Theta_p_max
                or (tnorm == 0.0 and self.Theta_p_max == 0.0)):
            raise AssumptionViolation(
                4, f"||Theta|| = {tnorm:.6g} not below bound {self.Theta_p_max:.6g}")
        Lam = self.Lambda_star
        if np.any(np.abs(Lam - np.diag(np.diag(Lam))) > 0.0):
            raise AssumptionViolation(5, "Lambda_star must be diagonal")
        d = np.diag(Lam)
        if np.any(d <= 0.0):
            raise AssumptionViolation(5, "Lambda_star must be positive definite")
        if not d.max() < self.Lambda_max:
            raise AssumptionViolation(
                5, f"||Lambda|| = {d.max():.6g} not below bound {self.Lambda_max:.6g}")
        if not (1.0 / d.min()) < self.Lambda_inv_max:
            raise AssumptionViolation(
                5, f"||Lambda^-1|| = {1.0 / d.min():.6g} not below bound "
                   f"{self.Lambda_inv_max:.6g}")

    @property
    def n_p(self) -> int:
        return self.A_p.shape[0]

    @property
    def m(self) -> int:
        return self.B_p.shape[1]

    @property
    def p_p(self) -> int:
        return self.C_p.shape[0]

    @property
    def n_z(self) -> int:
        return self.C_pz.shape[0]


@dataclass(frozen=True)
class AugmentedPlant:
    """Extended system over state (x_p, w_u, x_e) with the limiter lag inside.

    Block layout (state order x_p, w_u, x_e):

        A  = [[A_p, B_p, 0], [0, -I/tau, 0], [C_pz, D_pz, 0]]
        B1 = [B_p; 0; D_pz]      (uncertainty input, equals tau*A*B2 + B2)
        B2 = [0; I/tau; 0]       (computed-control input)
        Bz = [0; 0; -I]          (command feedthrough into the integrator)
        C  = [[C_p, 0, 0], [0, 0, I]]
        Cz = [C_pz, D_pz, 0]

    psi1_star is the stacked true uncertainty with psi1_star' x =
    Lambda Theta' x_p; it is orthogonal to B2 by construction.
    """

    plant: PlantModel
    actuator: ActuatorConfig
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Bz: np.ndarray
    C: np.ndarray
    Cz: np.ndarray
    psi1_star: np.ndarray
    psi_max: float

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B2.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def n_z(self) -> int:
        return self.Cz.shape[0]

    @property
    def tau(self) -> float:
        return self.actuator.tau


def augment(plant: PlantModel, actuator: ActuatorConfig) -> AugmentedPlant:
    """Assemble the extended plant and verify its structural properties.

    Raises RelativeDegreeMismatch if the computed-control path does not
    come out uniform relative degree two with full-rank leading Markov
    parameter, or if its transmission zeros are unstable.
    """
    if actuator.m != plant.m:
        raise ValueError("actuator channel count disagrees with plant inputs")
    n_p, m, n_z, p_p = plant.n_p, plant.m, plant.n_z, plant.p_p
    tau = actuator.tau
    n = n_p + m + n_z
    p = p_p + n_z

    A = np.zeros((n, n))
    A[:n_p, :n_p] = plant.A_p
    A[:n_p, n_p:n_p + m] = plant.B_p
    A[n_p:n_p + m, n_p:n_p + m] = -np.eye(m) / tau
    A[n_p + m:, :n_p] = plant.C_pz
    A[n_p + m:, n_p:n_p + m] = plant.D_pz

    B1 = np.zeros((n, m))
    B1[:n_p, :] = plant.B_p
    B1[n_p + m:, :] = plant.D_pz

    B2 = np.zeros((n, m))
    B2[n_p:n_p + m, :] = np.eye(m) / tau

    Bz = np.zeros((n, n_z))
    Bz[n_p + m:, :] = -np.eye(n_z)

    C = np.zeros((p, n))
    C[:p_p, :n_p] = plant.C_p
    C[p_p:, n_p + m:] = np.eye(n_z)

    Cz = np.zeros((n_z, n))
    Cz[:, :n_p] = plant.C_pz
    Cz[:, n_p:n_p + m] = plant.D_pz

    psi1_star = np.zeros((n, m))
    psi1_star[:n_p, :] = plant.Theta_p_star @ plant.Lambda_star
    psi_max = plant.Theta_p_max * plant.Lambda_max

    span_err = np.linalg.norm(tau * (A @ B2) + B2 - B1)
    if span_err > 1e-9 * (1.0 + np.linalg.norm(B1)):
        raise RelativeDegreeMismatch(
            f"uncertainty input not spanned by B2, A B2 (residual {span_err:.3e})")

    rd = input_relative_degree(StateSpace(A, B2, C))
    if rd.uniform != 2:
        raise RelativeDegreeMismatch(
            f"computed-control path has relative degree {rd.per_input}, expected "
            "uniform two")
    zs = transmission_zeros(StateSpace(A, B2, C))
    if not zs.all_stable:
        raise RelativeDegreeMismatch(
            f"computed-control path has unstable zeros {zs.zeros}")

    return AugmentedPlant(plant=plant, actuator=actuator, A=A, B1=B1, B2=B2,
                          Bz=Bz, C=C, Cz=Cz, psi1_star=psi1_star, psi_max=psi_max)


def true_dynamics(x: np.ndarray, u: np.ndarray, du2: np.ndarray,
                  z_cmd: np.ndarray, plant: AugmentedPlant):
    """Truth-aware right-hand side of the extended plant.

    Returns (x_dot, y, z) with the uncertainty injected:
    x' = A x + B1 psi1' x + B2 Lambda (u + du2) + Bz z_cmd.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    du2 = np.atleast_1d(np.asarray(du2, dtype=float))
    z_cmd = np.atleast_1d(np.asarray(z_cmd, dtype=float))
    Lam = plant.plant.Lambda_star
    psi_x = plant.psi1_star.T @ x
    x_dot = (plant.A @ x + plant.B1 @ psi_x
             + plant.B2 @ (Lam @ (u + du2)) + plant.Bz @ z_cmd)
    y = plant.C @ x
    z = plant.Cz @ x + plant.plant.D_pz @ psi_x
    return x_dot, y, z
