"""Region-of-attraction constants, boundedness verdicts, and runtime
Lyapunov monitoring of the closed loop.

Everything here is truth-aware by construction: the closed-loop matrix
contains the true uncertainty, so this module is an analysis companion for
simulation studies, not part of the deployed controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .controller import ControllerGains, truth_companions
from .errors import NotHurwitz
from .linalg import is_hurwitz, solve_lyapunov
from .sim import TrajectoryLog

__all__ = [
    "ClosedLoopMatrices",
    "StabilityReport",
    "MonitorLog",
    "assemble_closed_loop",
    "compute_report",
    "runtime_monitor",
    "attach_closed_loop_diagnostics",
    "trajectory_chi",
]


@dataclass(frozen=True)
class ClosedLoopMatrices:
    """Block matrices of the combined filter/reference/error/deficiency state.

    The state ordering is (xbar_m, x_m, e_mx, du2bar); the dynamics matrix
    is block upper triangular, so its spectrum is the union of the filter
    poles, the reference-model poles, the observer-loop poles, and the
    deficiency-filter poles.
    """

    A_cl: np.ndarray
    B_Omega: np.ndarray
    B_Z: np.ndarray
    B_xi: np.ndarray
    C_du2bar: np.ndarray
    C_up: np.ndarray
    C_xibar: np.ndarray
    K_xi: np.ndarray
    S_C: np.ndarray
    Gamma_C: np.ndarray
    P_cl: np.ndarray
    Q_cl: np.ndarray
    n: int
    m: int


def assemble_closed_loop(gains: ControllerGains,
                         Q_cl: np.ndarray | None = None) -> ClosedLoopMatrices:
    """Build the closed-loop blocks and the Lyapunov pair (P_cl, Q_cl).

    Q_cl defaults to the identity, which maximizes the usable decay-to-peak
    ratio of the quadratic form.  Raises NotHurwitz when any diagonal block
    (and hence the block-triangular whole) is unstable.
    """
    plant, design = gains.plant, gains.design
    n, m, n_z = plant.n, plant.m, plant.n_z
    a1, a0 = design.a1_1, design.a1_0
    Lam = plant.plant.Lambda_star
    A_L_star = plant.A + plant.B1 @ plant.psi1_star.T - design.L @ plant.C
    A_m = gains.A_m
    LC = design.L @ plant.C

    dim = 3 * n + m
    A_cl = np.zeros((dim, dim))
    r = a0 / a1
    A_cl[:n, :n] = -r * np.eye(n)
    A_cl[:n, n:2 * n] = (1.0 / a1) * np.eye(n)
    A_cl[n:2 * n, n:2 * n] = A_m
    A_cl[n:2 * n, 2 * n:3 * n] = LC
    A_cl[2 * n:3 * n, 2 * n:3 * n] = A_L_star
    A_cl[2 * n:3 * n, 3 * n:] = design.B2_1 @ Lam
    A_cl[3 * n:, 3 * n:] = -r * np.eye(m)
    if not is_hurwitz(A_cl):
        raise NotHurwitz("closed-loop block matrix is not Hurwitz")

    B_Omega = np.zeros((dim, m))
    B_Omega[2 * n:3 * n, :] = design.B2_1 @ Lam
    B_Z = np.zeros((dim, n_z))
    B_Z[n:2 * n, :] = plant.Bz
    k = m + 2 * n
    B_xi = np.zeros((k, n_z))
    B_xi[m:m + n, :] = a1 * plant.Bz
    C_du2bar = np.zeros((dim, m))
    C_du2bar[3 * n:, :] = np.eye(m)
    C_up = np.zeros((m, n))
    n_p = plant.plant.n_p
    C_up[:, n_p:n_p + m] = np.diag(1.0 / np.diag(Lam))

    C_xibar = np.zeros((k, dim))
    C_xibar[:m, :n] = design.K
    C_xibar[m:m + n, n:2 * n] = np.eye(n)
    C_xibar[m + n:, :n] = np.eye(n)

    K_xi = np.zeros((k, dim))
    K_xi[:m, n:2 * n] = design.K
    K_xi[m:m + n, n:2 * n] = a0 * np.eye(n) + a1 * A_m
    K_xi[m:m + n, 2 * n:3 * n] = a1 * LC
    K_xi[m + n:, n:2 * n] = np.eye(n)

    S_C = design.S2 @ plant.C
    Gamma_C = gains.gamma_omega * (C_xibar.T @ C_xibar)

    Q_cl = np.eye(dim) if Q_cl is None else np.atleast_2d(np.asarray(Q_cl, dtype=float))
    P_cl = solve_lyapunov(A_cl, Q_cl)
    return ClosedLoopMatrices(A_cl=A_cl, B_Omega=B_Omega, B_Z=B_Z, B_xi=B_xi,
                              C_du2bar=C_du2bar, C_up=C_up, C_xibar=C_xibar,
                              K_xi=K_xi, S_C=S_C, Gamma_C=Gamma_C,
                              P_cl=P_cl, Q_cl=Q_cl, n=n, m=m)


@dataclass
class StabilityReport:
    """Every boundedness constant plus the four verdicts."""

    P_B: float
    P_C: float
    P_Z: float
    gamma_max: float
    lambda_min: float
    u_min: float
    u_r_min: float
    p_min: float
    p_max: float
    rho: float
    q0: float
    omega_tilde_max: float
    omega_star_norm: float
    B_xi_omega: float
    K_xi_omega: float
    K_up: float
    alpha: float
    beta: float
    kappa: dict = field(default_factory=dict)
    chi_min: float = math.nan
    chi_max: float = math.nan
    omega_bar_max: float = math.nan
    z_cmd_max: float = 0.0
    V0: float = 0.0
    chi0_norm: float = 0.0
    assumption6_ok: bool = False
    discriminants_ok: bool = False
    theorem1_condition_i: bool = False
    theorem1_condition_ii: bool = False

    @property
    def all_ok(self) -> bool:
        return (self.assumption6_ok and self.discriminants_ok
                and self.theorem1_condition_i and self.theorem1_condition_ii)


def _quad_lower(k5: float, k4: float, k6: float) -> float:
    """Smaller positive root of k4 x^2 - k5 x + k6 = 0, with degenerate limits."""
    if k4 == 0.0:
        if k5 <= 0.0:
            return math.nan
        return k6 / k5
    disc = k5 * k5 - 4.0 * k4 * k6
    if disc < 0.0:
        return math.nan
    return (k5 - math.sqrt(disc)) / (2.0 * k4)


def _quad_upper(k5: float, k4: float, k6: float) -> float:
    """Larger positive root of k4 x^2 - k5 x + k6 = 0 (+inf when k4 == 0)."""
    if k4 == 0.0:
        return math.inf if k5 > 0.0 else math.nan
    disc = k5 * k5 - 4.0 * k4 * k6
    if disc < 0.0:
        return math.nan
    return (k5 + math.sqrt(disc)) / (2.0 * k4)


def _growth_root(k1: float, k2: float, k3: float) -> float:
    """Positive root of k1 x^2 + k2 x - k3 = 0, with the k1 -> 0 limit."""
    if k1 == 0.0:
        if k2 <= 0.0:
            return math.nan
        return k3 / k2
    disc = k2 * k2 + 4.0 * k1 * k3
    if disc < 0.0:
        return math.nan
    return (math.sqrt(disc) - k2) / (2.0 * k1)


def compute_report(cl: ClosedLoopMatrices, gains: ControllerGains,
                   z_cmd_max: float, V0: float,
                   chi0_norm: float = 0.0,
                   omega_tilde_max: float | None = None) -> StabilityReport:
    """Evaluate every boundedness constant literally from its formula.

    The parameter-error ceiling defaults to the storage-function bound
    sqrt(V0 * gamma_max / lambda_min); pass ``omega_tilde_max`` to
    override.  A negative discriminant is reported through the verdicts,
    never raised.
    """
    plant, design = gains.plant, gains.design
    act = plant.actuator
    Lam = plant.plant.Lambda_star
    a1 = design.a1_1

    P_B = scipy.linalg.norm(cl.P_cl @ cl.B_Omega, 2)
    P_C = scipy.linalg.norm(cl.P_cl @ cl.C_du2bar, 2)
    P_Z = scipy.linalg.norm(cl.P_cl @ cl.B_Z, 2)
    gamma_max = max(gains.gamma_omega, gains.gamma_omega_delta)
    lambda_min = float(np.min(np.diag(Lam)))
    u_min = float(np.min(act.u_max.limits))
    u_r_min = float(np.min(act.u_r_max.limits))
    eig_P = scipy.linalg.eigvalsh(cl.P_cl)
    p_min, p_max = float(eig_P[0]), float(eig_P[-1])
    rho = math.sqrt(p_max / p_min)
    q0 = float(scipy.linalg.eigvalsh(cl.Q_cl)[0])

    if omega_tilde_max is None:
        omega_tilde_max = math.sqrt(V0 * gamma_max / lambda_min) if gamma_max > 0 else 0.0
    ot_max = float(omega_tilde_max)

    omega_star, _ = truth_companions(plant, design)
    om_star_norm = scipy.linalg.norm(omega_star, 2)
    nB_xi = scipy.linalg.norm(cl.B_xi, 2)
    nK_xi = scipy.linalg.norm(cl.K_xi, 2)
    nC_xibar = scipy.linalg.norm(cl.C_xibar, 2)
    nS_C = scipy.linalg.norm(cl.S_C, 2)
    nGamma_C = scipy.linalg.norm(cl.Gamma_C, 2)
    B_xi_omega = (om_star_norm + ot_max) * nB_xi
    K_xi_omega = (om_star_norm + ot_max) * nK_xi
    nC_up = scipy.linalg.norm(cl.C_up, 2)
    nB2Lam_a1 = scipy.linalg.norm(plant.B2 @ Lam * a1, 2)
    K_up = nC_up * (nB2Lam_a1 * (ot_max * nC_xibar + (om_star_norm + 1.0)) + 2.0)

    alpha = P_B * ot_max * nC_xibar / K_xi_omega
    beta = act.tau * P_B * ot_max * nC_xibar / (K_xi_omega + K_up)

    k = {}
    k[1] = 2.0 * P_C * nS_C * ot_max * nGamma_C
    k[2] = abs(-q0 + 2.0 * ot_max * P_B * nC_xibar + 2.0 * P_C / a1 * K_xi_omega)
    k[3] = alpha * u_min - (2.0 * P_Z + 2.0 * P_C / a1 * B_xi_omega) * z_cmd_max
    k[4] = ot_max ** 2 * a1 * P_B * nS_C * nGamma_C * nC_xibar / K_xi_omega
    k[5] = q0 - 3.0 * ot_max * P_B * nC_xibar
    k[6] = (2.0 * P_Z + ot_max * P_B * B_xi_omega * nC_xibar / K_xi_omega) * z_cmd_max
    k[7] = abs(-q0 + 2.0 * ot_max * P_B * nC_xibar
               + 2.0 * P_C / a1 * (K_xi_omega + K_up))
    k[8] = beta * u_r_min - (2.0 * P_Z + 2.0 * P_C / a1 * B_xi_omega) * z_cmd_max
    k[9] = ot_max ** 2 * a1 * P_B * nS_C * nGamma_C * nC_xibar / (K_xi_omega + K_up)
    k[10] = (2.0 * P_Z + ot_max * P_B * B_xi_omega * nC_xibar
             / (K_xi_omega + K_up)) * z_cmd_max
    k[11] = 2.0 * P_Z * z_cmd_max
    k[12] = q0 - 2.0 * ot_max * P_B * nC_xibar

    chi_min_parts = [_quad_lower(k[5], k[4], k[6]),
                     _quad_lower(k[5], k[9], k[10])]
    chi_min_parts.append(k[11] / k[12] if k[12] > 0.0 else math.nan)
    chi_min = max(chi_min_parts) if all(map(math.isfinite, chi_min_parts)) else math.nan

    chi_max_parts = [_growth_root(k[1], k[2], k[3]),
                     _quad_upper(k[5], k[4], k[6]),
                     _growth_root(k[1], k[7], k[8]),
                     _quad_upper(k[5], k[9], k[10])]
    if any(map(math.isnan, chi_max_parts)):
        chi_max = math.nan
    else:
        chi_max = min(chi_max_parts)

    omega_bar_max = q0 / (3.0 * P_B * nC_xibar)

    disc_ok = (k[5] * k[5] >= 4.0 * k[4] * k[6]
               and k[5] * k[5] >= 4.0 * k[9] * k[10])
    a6 = (disc_ok and k[3] > 0.0 and k[8] > 0.0
          and math.isfinite(chi_min) and not math.isnan(chi_max)
          and rho * chi_min < chi_max)
    cond_i = (math.isfinite(chi_max) and chi0_norm < chi_max / rho)
    cond_ii = (gamma_max > 0.0
               and math.sqrt(max(V0, 0.0))
               < math.sqrt(lambda_min / gamma_max) * omega_bar_max)

    return StabilityReport(
        P_B=P_B, P_C=P_C, P_Z=P_Z, gamma_max=gamma_max, lambda_min=lambda_min,
        u_min=u_min, u_r_min=u_r_min, p_min=p_min, p_max=p_max, rho=rho, q0=q0,
        omega_tilde_max=ot_max, omega_star_norm=om_star_norm,
        B_xi_omega=B_xi_omega, K_xi_omega=K_xi_omega, K_up=K_up,
        alpha=alpha, beta=beta, kappa=k, chi_min=chi_min, chi_max=chi_max,
        omega_bar_max=omega_bar_max, z_cmd_max=z_cmd_max, V0=V0,
        chi0_norm=chi0_norm, assumption6_ok=a6, discriminants_ok=disc_ok,
        theorem1_condition_i=cond_i, theorem1_condition_ii=cond_ii)


def trajectory_chi(log: TrajectoryLog) -> np.ndarray:
    """Per-sample combined state (xbar_m, x_m, e_mx, du2bar); truth-aware."""
    if log.e_mx is None:
        raise ValueError("log is missing the reconstructed tracking error")
    return np.concatenate([log.block("xbar_m"), log.block("x_m"),
                           log.e_mx, log.block("du2bar")], axis=1)


def attach_closed_loop_diagnostics(log: TrajectoryLog,
                                   cl: ClosedLoopMatrices) -> None:
    """Fill the quadratic-form column W and cache the combined state."""
    chi = trajectory_chi(log)
    log.chi = chi
    log.W = np.einsum("ni,ij,nj->n", chi, cl.P_cl, chi)


@dataclass
class MonitorLog:
    """Per-sample annulus membership and decrement verdicts."""

    t: np.ndarray
    W: np.ndarray
    chi_norm: np.ndarray
    in_annulus: np.ndarray
    W_dot: np.ndarray
    case: np.ndarray            # 1, 2, 3, or 4 (mixed)
    violations: np.ndarray      # annulus samples with W_dot >= tolerance
    n_violations: int
    n_mixed: int
    chi_max_satisfied: bool


def runtime_monitor(log: TrajectoryLog, cl: ClosedLoopMatrices,
                    report: StabilityReport) -> MonitorLog:
    """Check the decrement of the quadratic form over the logged annulus.

    The derivative is estimated by central differences on the logged grid;
    the per-sample tolerance scales with the local second difference, which
    absorbs the curvature spikes at saturation switches.  Samples in
    simultaneous magnitude and rate saturation fall outside the three
    analyzed activity patterns and are labeled, not asserted.
    """
    if log.W is None:
        attach_closed_loop_diagnostics(log, cl)
    W = log.W
    chi = log.chi
    h = log.h_log
    N = W.shape[0]
    chi_norm = np.linalg.norm(chi, axis=1)

    du = log.signals["du"]
    du_r = log.signals["du_r"]
    mag_on = np.any(du != 0.0, axis=1)
    rate_on = np.any(du_r != 0.0, axis=1)
    case = np.where(~mag_on & ~rate_on, 1,
                    np.where(mag_on & ~rate_on, 2,
                             np.where(~mag_on & rate_on, 3, 4)))

    W_dot = np.full(N, np.nan)
    if N >= 3 and h > 0.0:
        W_dot[1:-1] = (W[2:] - W[:-2]) / (2.0 * h)
        second = np.zeros(N)
        second[1:-1] = np.abs(W[2:] - 2.0 * W[1:-1] + W[:-2]) / (h * h)
        tol = 10.0 * h * second
    else:
        tol = np.zeros(N)

    lo = report.chi_min if math.isfinite(report.chi_min) else 0.0
    hi = report.chi_max if math.isfinite(report.chi_max) else math.inf
    in_annulus = (chi_norm >= lo) & (chi_norm <= hi)

    interior = np.zeros(N, dtype=bool)
    interior[1:-1] = True
    checkable = in_annulus & interior & (case != 4)
    violations = checkable & (W_dot >= tol)
    chi_max_ok = bool(np.all(chi_norm < hi)) if math.isfinite(hi) else False

    return MonitorLog(t=log.t, W=W, chi_norm=chi_norm, in_annulus=in_annulus,
                      W_dot=W_dot, case=case, violations=violations,
                      n_violations=int(np.sum(violations)),
                      n_mixed=int(np.sum(case == 4)),
                      chi_max_satisfied=chi_max_ok)
