"""Offline gain design: baseline LQR, square-up, and the passivity-certified
observer gain.

The observer gain L is high-gain output feedback through the squared-up
input matrix; its strength is set by a scalar eps found by doubling and
bisection until a passivity certificate holds over a sampled uncertainty
set.  The certificate is a single matrix P with P*Bbar21 = C'S' exactly
and Q = -(A_L' P + P A_L) positive definite at every sampled uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import Infeasible, SMatrixSingular, SprInfeasible, SquareUpFailed
from .linalg import (
    StateSpace,
    input_relative_degree,
    is_hurwitz,
    numerical_rank,
    solve_care,
    solve_lyapunov,
    transmission_zeros,
)
from .plant import AugmentedPlant

__all__ = [
    "SprCertificate",
    "ControllerDesign",
    "design_baseline",
    "square_up",
    "design_observer_gain",
    "verify_spr",
    "design_controller",
    "uncertainty_samples",
]


@dataclass(frozen=True)
class SprCertificate:
    """Passivity certificate for the observer loop.

    ``residual_eq_constraint`` measures ||P Bbar21 - C'S'|| (relative);
    ``worst_uncertainty_margin`` is the smallest min-eigenvalue of the
    candidate Q over the sampled uncertainty set.  The certificate speaks
    for the sample set only, not the whole continuum.
    """

    P: np.ndarray
    Q: np.ndarray
    residual_eq_constraint: float
    worst_uncertainty_margin: float
    n_samples: int = 0


@dataclass(frozen=True)
class ControllerDesign:
    """All offline gains plus the passivity certificate."""

    K: np.ndarray
    a1_1: float
    a1_0: float
    B_s1: np.ndarray
    B2_1: np.ndarray
    Bbar2_1: np.ndarray
    S: np.ndarray
    S2: np.ndarray
    S1: np.ndarray
    L: np.ndarray
    epsilon: float
    certificate: SprCertificate

    @property
    def P(self) -> np.ndarray:
        return self.certificate.P

    @property
    def Q(self) -> np.ndarray:
        return self.certificate.Q


def design_baseline(plant: AugmentedPlant, Q_lqr, R_lqr) -> np.ndarray:
    """LQR state-feedback gain for the reference model, K = R^-1 B2' P."""
    Q_lqr = np.atleast_2d(np.asarray(Q_lqr, dtype=float))
    R_lqr = np.atleast_2d(np.asarray(R_lqr, dtype=float))
    P = solve_care(plant.A, plant.B2, Q_lqr, R_lqr)
    K = scipy.linalg.solve(R_lqr, plant.B2.T @ P)
    return K


def control_input_matrix(plant: AugmentedPlant, a1_1: float, a1_0: float) -> np.ndarray:
    """Equivalent first-order input matrix B2^1 = A B2 a1_1 + B2 a1_0."""
    return plant.A @ plant.B2 * a1_1 + plant.B2 * a1_0


def _squared_degree_ok(A, Bbar, C, m: int) -> bool:
    try:
        rd = input_relative_degree(StateSpace(A, Bbar, C))
    except Exception:
        return False
    p = C.shape[0]
    want = [2] * m + [1] * (p - m)
    return list(rd.per_input) == want


def square_up(plant: AugmentedPlant, rng: np.random.Generator | None = None,
              budget: int = 200) -> np.ndarray:
    """Fictitious input columns making {A, [B2, Bs1], C} square with stable zeros.

    Candidates place C*Bs1 on the orthogonal complement of C*A*B2 (so the
    added channels are relative degree one and the leading Markov matrix is
    square nonsingular) and randomize the kernel-of-C component, which is
    what moves the transmission zeros.  Each candidate is verified; the
    first one passing both the zero and the degree checks wins.  Returns an
    n-by-0 matrix when the system is already square.
    """
    A, B2, C = plant.A, plant.B2, plant.C
    n, m, p = plant.n, plant.m, plant.p
    if p == m:
        return np.zeros((n, 0))
    if p < m:
        raise SquareUpFailed("more inputs than outputs; cannot square up")
    rng = rng if rng is not None else np.random.default_rng(0)

    CAB2 = C @ A @ B2
    # orthonormal basis of the complement of range(C A B2) inside R^p
    q, _ = scipy.linalg.qr(CAB2, mode="full")
    U = q[:, m:] if numerical_rank(CAB2) == m else None
    if U is None:
        raise SquareUpFailed("C A B2 is rank deficient")
    C_pinv = scipy.linalg.pinv(C)
    # kernel of C (directions invisible to the output map)
    _, s, Vt = scipy.linalg.svd(C)
    rank_c = int(np.sum(s > max(C.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)))
    N_C = Vt[rank_c:].T

    for trial in range(budget):
        if trial == 0:
            W = np.zeros((N_C.shape[1], p - m))
        else:
            W = rng.standard_normal((N_C.shape[1], p - m))
        B_s1 = C_pinv @ U + (N_C @ W if N_C.size else 0.0)
        Bbar = np.hstack([B2, B_s1])
        if not _squared_degree_ok(A, Bbar, C, m):
            continue
        try:
            zs = transmission_zeros(StateSpace(A, Bbar, C))
        except Exception:
            continue
        if zs.all_stable:
            return B_s1
    raise SquareUpFailed(f"no valid columns found within {budget} candidates")


def uncertainty_samples(plant: AugmentedPlant, n_random: int = 8,
                        seed: int = 20260810) -> list[np.ndarray]:
    """Sampled admissible uncertainty matrices, corners plus random draws.

    Returns stacked n-by-m matrices bounded by the plant's uncertainty norm
    cap, built by scaling fixed directions; the zero matrix is always
    included and the set for a smaller cap is the same set shrunk, so
    certification difficulty is monotone in the cap.
    """
    n, m, n_p = plant.n, plant.m, plant.plant.n_p
    psi_max = plant.psi_max
    samples = [np.zeros((n, m))]
    if psi_max <= 0.0:
        return samples
    rng = np.random.default_rng(seed)
    dirs: list[np.ndarray] = []
    # axis-aligned corners within the plant-state block
    for i in range(min(n_p, 4)):
        for j in range(m):
            D = np.zeros((n, m))
            D[i, j] = 1.0
            dirs.append(D)
            dirs.append(-D)
    for _ in range(n_random):
        D = np.zeros((n, m))
        D[:n_p, :] = rng.standard_normal((n_p, m))
        dirs.append(D)
    # scale each direction onto the norm-ball boundary (worst case along it)
    margin = 1.0 - 1e-9
    for D in dirs:
        nrm = np.linalg.norm(D, 2)
        if nrm > 0.0:
            samples.append(D * (psi_max * margin / nrm))
    return samples


def _normal_form(Bbar2_1: np.ndarray, S: np.ndarray, C: np.ndarray):
    """Coordinates splitting the squared input range from its complement.

    Returns (T, T_inv, n_out) with the first p rows of T equal to S C and
    the remaining rows spanning the orthogonal complement of
    range(Bbar2_1); in these coordinates the constraint P Bbar21 = C'S'
    pins the top-left block of the transformed P to (S S')^-1 and zeroes
    the coupling block, leaving the lower-right block free.
    """
    n, p = Bbar2_1.shape
    Cbar = S @ C
    q, _ = scipy.linalg.qr(Bbar2_1, mode="full")
    Z = q[:, p:]
    T = np.vstack([Cbar, Z.T])
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e12:
        raise Infeasible(f"normal-form transform is ill conditioned ({cond:.3e})")
    return T, scipy.linalg.inv(T), p


def _certificate_for_P(P: np.ndarray, A_L_samples: list[np.ndarray]):
    """Worst min-eigenvalue of -(A_L'P + P A_L) over the samples."""
    worst = np.inf
    Q_nominal = None
    for i, A_L in enumerate(A_L_samples):
        M = -(A_L.T @ P + P @ A_L)
        M = 0.5 * (M + M.T)
        lam = float(scipy.linalg.eigvalsh(M)[0])
        if i == 0:
            Q_nominal = M
        worst = min(worst, lam)
    return worst, Q_nominal


def _sym_from_vec(v: np.ndarray, d: int) -> np.ndarray:
    X = np.zeros((d, d))
    iu = np.triu_indices(d)
    X[iu] = v
    X.T[iu] = v
    return X


def _vec_from_sym(X: np.ndarray) -> np.ndarray:
    return X[np.triu_indices(X.shape[0])]


def _common_lyapunov_seed(A22_samples: list[np.ndarray]) -> np.ndarray:
    """Symmetric X minimizing sum_i ||X A22_i + A22_i' X + I||_F^2.

    Linear least squares over the upper-triangle parameterization; seeds
    the margin maximization with an approximate common Lyapunov solution
    for the sampled zero-dynamics blocks.
    """
    d = A22_samples[0].shape[0]
    n_par = d * (d + 1) // 2
    basis = []
    for idx in range(n_par):
        v = np.zeros(n_par)
        v[idx] = 1.0
        basis.append(_sym_from_vec(v, d))
    cols = [np.concatenate([(E @ A + A.T @ E).ravel() for A in A22_samples])
            for E in basis]
    M = np.stack(cols, axis=1)
    b = np.concatenate([-np.eye(d).ravel()] * len(A22_samples))
    sol, *_ = scipy.linalg.lstsq(M, b)
    return _sym_from_vec(sol, d)


def _offdiag_doubling(d: int) -> np.ndarray:
    """Inner-product weights mapping Frobenius gradients to triangle coords."""
    W = 2.0 - np.eye(d)
    return W[np.triu_indices(d)]


def spr_feasibility(A_L_samples: list[np.ndarray], Bbar2_1: np.ndarray,
                    S: np.ndarray, C: np.ndarray,
                    max_cuts: int = 80) -> SprCertificate:
    """Search for one P certifying passivity at every sampled loop matrix.

    The equality P Bbar21 = C'S' is eliminated by the normal-form
    parameterization, which pins the transformed P except for its
    lower-right symmetric block X.  The worst-case margin
    min_i lambda_min(-(A_i'P(X) + P(X)A_i)), jointly with positivity of X,
    is concave in X, so it is maximized globally with a cutting-plane
    iteration (LP master problems) seeded by least-squares common-Lyapunov
    solutions of the sampled zero-dynamics blocks.  Raises Infeasible when
    the maximized margin is nonpositive.
    """
    n = Bbar2_1.shape[0]
    p = Bbar2_1.shape[1]
    T, T_inv, _ = _normal_form(Bbar2_1, S, C)
    SSt = S @ S.T
    P11 = scipy.linalg.inv(0.5 * (SSt + SSt.T))
    P11 = 0.5 * (P11 + P11.T)

    def assemble(X: np.ndarray | None) -> np.ndarray:
        P_tilde = P11 if X is None else scipy.linalg.block_diag(P11, X)
        P = T.T @ P_tilde @ T
        return 0.5 * (P + P.T)

    def finish(P: np.ndarray) -> SprCertificate:
        worst, Q_nom = _certificate_for_P(P, A_L_samples)
        residual = _constraint_residual(P, Bbar2_1, S, C)
        if worst <= 0.0 or scipy.linalg.eigvalsh(P)[0] <= 0.0:
            raise Infeasible("no parameterized P yields a positive margin", worst)
        return SprCertificate(P=P, Q=Q_nom, residual_eq_constraint=residual,
                              worst_uncertainty_margin=worst,
                              n_samples=len(A_L_samples))

    if n == p:
        return finish(assemble(None))

    d = n - p
    A22s = [(T @ A_L @ T_inv)[p:, p:] for A_L in A_L_samples]
    # weight for the X-positivity term, on the zero-dynamics scale so the
    # max-min objective stays balanced
    pd_weight = scipy.linalg.norm(A22s[0], 2) + 1.0
    offdiag = _offdiag_doubling(d)

    def f_and_subgrad(X: np.ndarray):
        """Concave objective min(margins, weighted lambda_min(X)) + one cut."""
        P = assemble(X)
        best_val, grad = np.inf, None
        for A_i in A_L_samples:
            Q = -(A_i.T @ P + P @ A_i)
            Q = 0.5 * (Q + Q.T)
            w, V = scipy.linalg.eigh(Q, subset_by_index=(0, 0))
            if w[0] < best_val:
                v = V[:, 0]
                tv = (T @ v)[p:]
                tav = (T @ (A_i @ v))[p:]
                G = -(np.outer(tav, tv) + np.outer(tv, tav))
                best_val, grad = float(w[0]), G
        wx, Vx = scipy.linalg.eigh(X, subset_by_index=(0, 0))
        if pd_weight * wx[0] < best_val:
            u = Vx[:, 0]
            best_val, grad = pd_weight * float(wx[0]), pd_weight * np.outer(u, u)
        g_vec = _vec_from_sym(0.5 * (grad + grad.T)) * offdiag
        return best_val, g_vec

    seeds = []
    X_ls = _common_lyapunov_seed(A22s)
    if np.all(np.isfinite(X_ls)):
        seeds.append(X_ls)
    A22_nom = A22s[0]
    if is_hurwitz(A22_nom):
        seeds.append(solve_lyapunov(A22_nom, np.eye(d)))
    seeds.append(np.eye(d))

    best_X, best_f = None, -np.inf
    for X0 in seeds:
        for s in (0.1, 1.0, 10.0):
            val, _ = f_and_subgrad(s * X0)
            if val > best_f:
                best_X, best_f = s * X0, val

    # cutting planes: maximize t subject to t <= f(x_j) + g_j.(x - x_j),
    # in units of the seed scale so the LP stays well conditioned
    from scipy.optimize import linprog

    n_par = d * (d + 1) // 2
    scale_x = np.abs(_vec_from_sym(best_X)).max() + 1.0
    scale_f = abs(best_f) + 1.0
    R = 1e3
    cuts_A, cuts_b = [], []
    x = _vec_from_sym(best_X) / scale_x
    c = np.zeros(n_par + 1)
    c[-1] = -1.0
    bounds = [(-R, R)] * n_par + [(None, None)]
    for _ in range(max_cuts):
        val, g = f_and_subgrad(_sym_from_vec(x * scale_x, d))
        if val > best_f:
            best_f, best_X = val, _sym_from_vec(x * scale_x, d)
        g_hat = g * (scale_x / scale_f)
        cuts_A.append(np.concatenate([-g_hat, [1.0]]))
        cuts_b.append(val / scale_f - g_hat @ x)
        res = linprog(c, A_ub=np.array(cuts_A), b_ub=np.array(cuts_b),
                      bounds=bounds, method="highs")
        if not res.success:
            break
        x_new, bound = res.x[:-1], res.x[-1] * scale_f
        if bound - best_f <= 1e-9 * (abs(best_f) + 1.0) + 1e-12:
            break
        x = x_new

    return finish(assemble(best_X))


def _constraint_residual(P, Bbar2_1, S, C) -> float:
    return float(scipy.linalg.norm(P @ Bbar2_1 - C.T @ S.T)
                 / (1.0 + scipy.linalg.norm(P)))


def verify_spr(A_L_star: np.ndarray, Bbar2_1: np.ndarray, S: np.ndarray,
               C: np.ndarray) -> SprCertificate:
    """Certificate for one loop matrix (rejects non-Hurwitz input first)."""
    A_L_star = np.atleast_2d(np.asarray(A_L_star, dtype=float))
    if not is_hurwitz(A_L_star):
        raise Infeasible("loop matrix is not Hurwitz")
    return spr_feasibility([A_L_star], np.atleast_2d(Bbar2_1),
                           np.atleast_2d(S), np.atleast_2d(C))


def _observer_gain_for_eps(plant, Bbar2_1, S, eps: float):
    C = plant.C
    Cbar = S @ C
    CB = Cbar @ Bbar2_1
    CB_inv = scipy.linalg.inv(CB)
    core = Cbar @ plant.A @ Bbar2_1
    R_inv = CB_inv @ (core + core.T) @ CB_inv + eps * np.eye(CB.shape[0])
    L = Bbar2_1 @ R_inv @ S
    return L


def _certified(plant, design_bits, eps, psi_samples, margin_floor_rel):
    Bbar2_1, S = design_bits
    L = _observer_gain_for_eps(plant, Bbar2_1, S, eps)
    A_L_samples = [plant.A + plant.B1 @ psi.T - L @ plant.C for psi in psi_samples]
    if not all(is_hurwitz(A_L) for A_L in A_L_samples):
        return None
    try:
        cert = spr_feasibility(A_L_samples, Bbar2_1, S, plant.C)
    except Infeasible:
        return None
    floor = margin_floor_rel * (1.0 + scipy.linalg.norm(cert.P, 2))
    if cert.worst_uncertainty_margin <= floor:
        return None
    return L, cert


def design_observer_gain(plant: AugmentedPlant, B_s1: np.ndarray,
                         a1_1: float = 1.0, a1_0: float = 1.0,
                         eps_start: float = 1e-2, eps_cap: float = 1e7,
                         n_random_samples: int = 8, seed: int = 20260810,
                         bisection_rounds: int = 20,
                         margin_floor_rel: float = 1e-6):
    """Observer gain with a passivity certificate over sampled uncertainty.

    Doubles eps from ``eps_start`` until the certificate holds for every
    sampled uncertainty (all loop matrices Hurwitz, common P with positive
    worst-case margin), then bisects toward the smallest certified value.
    Returns (S, L, eps, certificate, B2_1, Bbar2_1).
    """
    B2_1 = control_input_matrix(plant, a1_1, a1_0)
    B_s1 = np.atleast_2d(np.asarray(B_s1, dtype=float)) if np.size(B_s1) else np.zeros((plant.n, 0))
    if B_s1.shape[0] != plant.n:
        B_s1 = B_s1.reshape(plant.n, -1)
    Bbar2_1 = np.hstack([B2_1, B_s1])
    St = plant.C @ Bbar2_1
    if numerical_rank(St) < plant.p:
        raise SMatrixSingular("C*[B2_1, B_s1] is rank deficient")
    S = St.T
    S2 = St[:, :plant.m].T
    S1 = St[:, plant.m:].T

    psi_samples = uncertainty_samples(plant, n_random=n_random_samples, seed=seed)
    bits = (Bbar2_1, S)

    eps = eps_start
    hit = None
    while eps <= eps_cap:
        hit = _certified(plant, bits, eps, psi_samples, margin_floor_rel)
        if hit is not None:
            break
        eps *= 2.0
    if hit is None:
        raise SprInfeasible(
            f"no eps in [{eps_start:g}, {eps_cap:g}] certifies passivity over "
            f"{len(psi_samples)} uncertainty samples")

    lo, hi = eps / 2.0, eps
    L, cert = hit
    if hi > eps_start:
        for _ in range(bisection_rounds):
            mid = 0.5 * (lo + hi)
            trial = _certified(plant, bits, mid, psi_samples, margin_floor_rel)
            if trial is not None:
                hi, (L, cert) = mid, trial
            else:
                lo = mid
        eps = hi
    return S, S2, S1, L, eps, cert, B2_1, Bbar2_1


def design_controller(plant: AugmentedPlant, Q_lqr, R_lqr,
                      a1_1: float = 1.0, a1_0: float = 1.0,
                      B_s1: np.ndarray | None = None,
                      eps_start: float = 1e-2, eps_cap: float = 1e7,
                      n_random_samples: int = 8,
                      seed: int = 20260810,
                      margin_floor_rel: float = 1e-6) -> ControllerDesign:
    """Full pipeline: baseline gain, square-up, observer gain, certificate."""
    if a1_1 <= 0.0 or a1_0 <= 0.0:
        raise ValueError("zero-placement coefficients must be positive")
    K = design_baseline(plant, Q_lqr, R_lqr)
    if B_s1 is None:
        B_s1 = square_up(plant, rng=np.random.default_rng(seed))
    S, S2, S1, L, eps, cert, B2_1, Bbar2_1 = design_observer_gain(
        plant, B_s1, a1_1=a1_1, a1_0=a1_0, eps_start=eps_start,
        eps_cap=eps_cap, n_random_samples=n_random_samples, seed=seed,
        margin_floor_rel=margin_floor_rel)
    return ControllerDesign(K=K, a1_1=a1_1, a1_0=a1_0, B_s1=B_s1, B2_1=B2_1,
                            Bbar2_1=Bbar2_1, S=S, S2=S2, S1=S1, L=L,
                            epsilon=eps, certificate=cert)
