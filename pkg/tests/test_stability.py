"""Region-of-attraction constants, verdicts, and the runtime monitor."""

import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from adaptlim.controller import ControllerGains, truth_companions
from adaptlim.stability import (
    assemble_closed_loop,
    attach_closed_loop_diagnostics,
    compute_report,
    runtime_monitor,
    trajectory_chi,
)
from conftest import run_mode


@pytest.fixture(scope="module")
def closed_loop(longitudinal_setup):
    sc, aug, design = longitudinal_setup
    gains = ControllerGains(plant=aug, design=design,
                            gamma_omega=sc.gamma_omega,
                            gamma_omega_delta=sc.gamma_omega_delta)
    return gains, assemble_closed_loop(gains)


def test_block_triangular_spectrum(closed_loop, longitudinal_setup):
    sc, aug, design = longitudinal_setup
    gains, cl = closed_loop
    n, m = aug.n, aug.m
    r = design.a1_0 / design.a1_1
    A_L_star = aug.A + aug.B1 @ aug.psi1_star.T - design.L @ aug.C
    want = np.concatenate([
        np.full(n, -r),
        np.linalg.eigvals(gains.A_m),
        np.linalg.eigvals(A_L_star),
        np.full(m, -r),
    ])
    got = np.linalg.eigvals(cl.A_cl)
    assert np.allclose(np.sort_complex(got), np.sort_complex(want), atol=1e-8)
    # strictly upper-triangular couplings below the diagonal blocks
    assert np.allclose(cl.A_cl[n:, :n], 0.0)
    assert np.allclose(cl.A_cl[2 * n:, n:2 * n], 0.0)
    assert np.allclose(cl.A_cl[3 * n:, 2 * n:3 * n], 0.0)


def test_filter_blocks_at_unit_coefficients(closed_loop, longitudinal_setup):
    sc, aug, design = longitudinal_setup
    _, cl = closed_loop
    assert design.a1_1 == 1.0 and design.a1_0 == 1.0
    ev = np.linalg.eigvals(cl.A_cl)
    assert np.sum(np.isclose(ev, -1.0, atol=1e-9)) >= aug.n + aug.m


def test_lyapunov_pair_residual(closed_loop):
    _, cl = closed_loop
    resid = cl.A_cl.T @ cl.P_cl + cl.P_cl @ cl.A_cl + cl.Q_cl
    assert scipy.linalg.norm(resid) < 1e-8 * (1.0 + scipy.linalg.norm(cl.P_cl))
    scipy.linalg.cholesky(cl.P_cl)


def _report_oracle(cl, gains, z_cmd_max, V0):
    """Independent straight-line transcription of every constant."""
    plant, design = gains.plant, gains.design
    act = plant.actuator
    a1 = design.a1_1
    nrm = lambda M: scipy.linalg.norm(M, 2)

    P_B = nrm(cl.P_cl @ cl.B_Omega)
    P_C = nrm(cl.P_cl @ cl.C_du2bar)
    P_Z = nrm(cl.P_cl @ cl.B_Z)
    gamma_max = max(gains.gamma_omega, gains.gamma_omega_delta)
    lam = np.diag(plant.plant.Lambda_star)
    lambda_min = lam.min()
    u_min = act.u_max.limits.min()
    u_r_min = act.u_r_max.limits.min()
    eigP = np.linalg.eigvalsh(cl.P_cl)
    p_min, p_max = eigP[0], eigP[-1]
    rho = math.sqrt(p_max / p_min)
    q0 = np.linalg.eigvalsh(cl.Q_cl)[0]
    ot = math.sqrt(V0 * gamma_max / lambda_min)
    om_star, _ = truth_companions(plant, design)
    os_n = nrm(om_star)
    B_xi_omega = (os_n + ot) * nrm(cl.B_xi)
    K_xi_omega = (os_n + ot) * nrm(cl.K_xi)
    nC = nrm(cl.C_xibar)
    nS = nrm(cl.S_C)
    nG = nrm(cl.Gamma_C)
    K_up = nrm(cl.C_up) * (nrm(plant.B2 @ plant.plant.Lambda_star * a1)
                           * (ot * nC + (os_n + 1.0)) + 2.0)
    alpha = P_B * ot * nC / K_xi_omega
    beta = act.tau * P_B * ot * nC / (K_xi_omega + K_up)
    k = {
        1: 2 * P_C * nS * ot * nG,
        2: abs(-q0 + 2 * ot * P_B * nC + 2 * P_C / a1 * K_xi_omega),
        3: alpha * u_min - (2 * P_Z + 2 * P_C / a1 * B_xi_omega) * z_cmd_max,
        4: ot ** 2 * a1 * P_B * nS * nG * nC / K_xi_omega,
        5: q0 - 3 * ot * P_B * nC,
        6: (2 * P_Z + ot * P_B * B_xi_omega * nC / K_xi_omega) * z_cmd_max,
        7: abs(-q0 + 2 * ot * P_B * nC + 2 * P_C / a1 * (K_xi_omega + K_up)),
        8: beta * u_r_min - (2 * P_Z + 2 * P_C / a1 * B_xi_omega) * z_cmd_max,
        9: ot ** 2 * a1 * P_B * nS * nG * nC / (K_xi_omega + K_up),
        10: (2 * P_Z + ot * P_B * B_xi_omega * nC / (K_xi_omega + K_up))
            * z_cmd_max,
        11: 2 * P_Z * z_cmd_max,
        12: q0 - 2 * ot * P_B * nC,
    }

    def lo(k5, k4, k6):
        if k4 == 0.0:
            return k6 / k5 if k5 > 0 else math.nan
        d = k5 * k5 - 4 * k4 * k6
        return (k5 - math.sqrt(d)) / (2 * k4) if d >= 0 else math.nan

    def hi(k5, k4, k6):
        if k4 == 0.0:
            return math.inf if k5 > 0 else math.nan
        d = k5 * k5 - 4 * k4 * k6
        return (k5 + math.sqrt(d)) / (2 * k4) if d >= 0 else math.nan

    def gr(k1, k2, k3):
        if k1 == 0.0:
            return k3 / k2 if k2 > 0 else math.nan
        d = k2 * k2 + 4 * k1 * k3
        return (math.sqrt(d) - k2) / (2 * k1) if d >= 0 else math.nan

    parts = [lo(k[5], k[4], k[6]), lo(k[5], k[9], k[10]),
             k[11] / k[12] if k[12] > 0 else math.nan]
    chi_min = max(parts) if all(map(math.isfinite, parts)) else math.nan
    entries = [gr(k[1], k[2], k[3]), hi(k[5], k[4], k[6]),
               gr(k[1], k[7], k[8]), hi(k[5], k[9], k[10])]
    chi_max = math.nan if any(map(math.isnan, entries)) else min(entries)
    omega_bar_max = q0 / (3 * P_B * nC)
    return k, chi_min, chi_max, omega_bar_max, alpha, beta


@pytest.mark.parametrize("z_cmd_max,V0", [(0.0, 0.0), (1e-6, 1e-10),
                                          (1e-4, 1e-9), (0.5, 1e-4),
                                          (3.0, 1e-3)])
def test_second_transcription_agreement(closed_loop, z_cmd_max, V0):
    gains, cl = closed_loop
    rep = compute_report(cl, gains, z_cmd_max=z_cmd_max, V0=V0)
    k2, chi_min2, chi_max2, ombar2, alpha2, beta2 = _report_oracle(
        cl, gains, z_cmd_max, V0)
    for i in range(1, 13):
        a, b = rep.kappa[i], k2[i]
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300), f"kappa_{i}"
    for a, b in ((rep.chi_min, chi_min2), (rep.chi_max, chi_max2),
                 (rep.omega_bar_max, ombar2), (rep.alpha, alpha2),
                 (rep.beta, beta2)):
        if math.isnan(b):
            assert math.isnan(a)
        elif math.isinf(b):
            assert math.isinf(a)
        else:
            assert a == pytest.approx(b, rel=1e-12)


def test_zero_command_limits(closed_loop):
    # with a zero command bound the inner radius collapses to zero and the
    # pure-command constants vanish
    gains, cl = closed_loop
    rep = compute_report(cl, gains, z_cmd_max=0.0, V0=1e-10)
    assert rep.chi_min == 0.0
    assert rep.kappa[6] == 0.0
    assert rep.kappa[10] == 0.0
    assert rep.kappa[11] == 0.0
    assert math.isfinite(rep.chi_max) and rep.chi_max > 0.0


def test_perfect_initialization_limits(closed_loop):
    # zero parameter-error ceiling wipes the terms linear in it
    gains, cl = closed_loop
    rep = compute_report(cl, gains, z_cmd_max=0.1, V0=0.0)
    assert rep.omega_tilde_max == 0.0
    assert rep.kappa[1] == 0.0
    assert rep.kappa[4] == 0.0
    assert rep.kappa[9] == 0.0
    assert rep.kappa[5] == pytest.approx(rep.q0)
    assert rep.kappa[12] == pytest.approx(rep.q0)


def test_huge_command_fails_assumption(closed_loop):
    gains, cl = closed_loop
    rep = compute_report(cl, gains, z_cmd_max=1e6, V0=1e-6)
    assert not rep.assumption6_ok
    assert not rep.all_ok


def test_v0_override_trivializes_condition_two(closed_loop):
    gains, cl = closed_loop
    rep = compute_report(cl, gains, z_cmd_max=1e6, V0=0.0)
    assert rep.theorem1_condition_ii


def test_report_verdicts_pass_on_check_fixture(roa_setup):
    sc, aug, design, gains, cl, log, report = roa_setup
    assert report.assumption6_ok
    assert report.discriminants_ok
    assert report.theorem1_condition_i
    assert report.theorem1_condition_ii
    assert report.all_ok


def test_level_set_inside_annulus(roa_setup):
    # the invariant level set of the quadratic form sits inside the shell
    # whenever the radius ordering holds
    sc, aug, design, gains, cl, log, report = roa_setup
    assert report.rho * report.chi_min < report.chi_max
    rng = np.random.default_rng(0)
    level = report.p_min * report.chi_max ** 2
    for _ in range(300):
        d = rng.standard_normal(cl.A_cl.shape[0])
        scale = math.sqrt(level / float(d @ cl.P_cl @ d))
        chi = d * scale
        r = np.linalg.norm(chi)
        assert r <= report.chi_max * (1 + 1e-9)
        assert r >= report.chi_min * (1 - 1e-9)


def test_monitor_unsaturated_run_all_case_one(roa_setup):
    sc, aug, design, gains, cl, log, report = roa_setup
    mon = runtime_monitor(log, cl, report)
    assert np.all(mon.case == 1)
    assert mon.n_violations == 0
    assert mon.n_mixed == 0
    assert mon.chi_max_satisfied


def test_monitor_vacuous_when_trajectory_below_shell(roa_setup):
    sc, aug, design, gains, cl, log, report = roa_setup
    chi_norm = np.linalg.norm(log.chi, axis=1)
    if np.all(chi_norm < report.chi_min):
        mon = runtime_monitor(log, cl, report)
        assert not np.any(mon.in_annulus)


def test_monitor_labels_saturation_cases(longitudinal_setup, longitudinal_logs):
    sc, aug, design = longitudinal_setup
    gains = ControllerGains(plant=aug, design=design,
                            gamma_omega=sc.gamma_omega,
                            gamma_omega_delta=sc.gamma_omega_delta)
    cl = assemble_closed_loop(gains)
    log = longitudinal_logs["proposed"]
    attach_closed_loop_diagnostics(log, cl)
    rep = compute_report(cl, gains, z_cmd_max=sc.z_cmd_max, V0=float(log.V[0]))
    mon = runtime_monitor(log, cl, rep)
    # this run saturates, so cases beyond quiescent must appear and the
    # labels must partition the samples
    assert set(np.unique(mon.case)) >= {1}
    assert np.any(mon.case != 1)
    assert mon.case.shape == log.t.shape


def test_chi_needs_diagnostics(longitudinal_setup):
    sc, aug, design = longitudinal_setup
    log = run_mode(replace(sc, T=1.0), aug, design, "proposed")
    log.e_mx = None
    with pytest.raises(ValueError):
        trajectory_chi(log)


def test_open_loop_stable_bounded_from_any_start(longitudinal_setup):
    # a stable airframe with a hard-limited input keeps its physical state
    # bounded even from initial conditions far outside the certified region
    # (which is microscopic, so these starts all violate the radius
    # condition); the adaptation transient is stiff, hence the finer step
    from adaptlim.sim import CommandSchedule
    sc, aug, design = longitudinal_setup
    sc2 = replace(sc, T=10.0, x_p0=np.array([20.0, -15.0]), norm_stop=1e9,
                  gamma_omega=5.0, gamma_omega_delta=1.0, h=1e-4,
                  log_every=10, command=CommandSchedule.zero(1),
                  z_cmd_max=None)
    log = run_mode(sc2, aug, design, "proposed")
    assert log.stop_reason == "completed"
    x_p = log.block("x")[:, :2]
    assert np.all(np.isfinite(x_p))
    assert np.abs(x_p).max() <= 20.0 * (1 + 1e-9)
    assert np.abs(x_p[-1]).max() < 1.0
    assert np.max(np.diff(log.V)) <= 0.0
