"""Small dense linear-systems kernel.

State-space containers, input relative degree, transmission zeros via the
system pencil, and the Riccati/Lyapunov solves used by the design pipeline.
All functions are pure and operate on plain numpy arrays; sizes are desk
scale (n of order tens), so the dense LAPACK paths in scipy are used
throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    NoRelativeDegree,
    NoStabilizingSolution,
    NotHurwitz,
    NotStabilizable,
    PencilDegenerate,
    RankDeficient,
)

__all__ = [
    "StateSpace",
    "RelativeDegree",
    "TransmissionZeroSet",
    "input_relative_degree",
    "transmission_zeros",
    "solve_care",
    "solve_lyapunov",
    "numerical_rank",
    "is_hurwitz",
    "is_controllable",
    "is_observable",
]

_EPS = np.finfo(float).eps

# Generalized eigenvalues beyond this magnitude are treated as infinite
# (pencil directions with a singular mass matrix).
_ZERO_MAGNITUDE_CUTOFF = 1e10


def _as_matrix(M, name: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True)
class StateSpace:
    """Continuous-time state-space model (A, B, C, D); D defaults to zero."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        D = self.D
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        else:
            D = _as_matrix(D, "D")
            if D.shape != (C.shape[0], B.shape[1]):
                raise ValueError(f"D shape {D.shape} inconsistent with C, B")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class RelativeDegree:
    """Per-input relative degrees, with the uniform value when they agree."""

    per_input: tuple[int, ...]
    uniform: int | None = field(default=None)

    def __post_init__(self):
        per = tuple(int(r) for r in self.per_input)
        if any(r < 1 for r in per):
            raise ValueError("relative degrees must be positive")
        uni = per[0] if len(set(per)) == 1 else None
        object.__setattr__(self, "per_input", per)
        object.__setattr__(self, "uniform", uni)


@dataclass(frozen=True)
class TransmissionZeroSet:
    """Finite zeros of a system pencil and their stability verdict."""

    zeros: tuple[complex, ...]
    all_stable: bool = field(default=True)

    def __post_init__(self):
        zs = tuple(complex(z) for z in self.zeros)
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "all_stable", all(z.real < 0 for z in zs))


def numerical_rank(M: np.ndarray, rtol: float | None = None) -> int:
    """Rank from singular values with tolerance max(dim) * eps * sigma_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = scipy.linalg.svdvals(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = (rtol if rtol is not None else max(M.shape) * _EPS) * s[0]
    return int(np.sum(s > tol))


def is_hurwitz(A: np.ndarray, margin: float = 0.0) -> bool:
    """True when every eigenvalue of A has real part < -margin."""
    return bool(np.all(np.linalg.eigvals(np.asarray(A, dtype=float)).real < -margin))


def is_controllable(A: np.ndarray, B: np.ndarray) -> bool:
    """PBH test: rank [A - lam I, B] = n at every eigenvalue of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    eye = np.eye(n)
    for lam in np.linalg.eigvals(A):
        M = np.hstack([A - lam * eye, B]).astype(complex)
        if numerical_rank_complex(M) < n:
            return False
    return True


def is_observable(A: np.ndarray, C: np.ndarray) -> bool:
    return is_controllable(np.asarray(A, dtype=float).T, np.asarray(C, dtype=float).T)


def numerical_rank_complex(M: np.ndarray) -> int:
    s = scipy.linalg.svdvals(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > max(M.shape) * _EPS * s[0]))


def input_relative_degree(sys: StateSpace) -> RelativeDegree:
    """Per-column relative degree of {A, B, C}.

    For each input column b_j, finds the smallest r_j such that
    C A^(r_j - 1) b_j is nonzero, probing up to depth n, then checks that
    the matrix of leading Markov parameters has full column rank.

    Raises NoRelativeDegree if some column stays in the kernel for all
    probe depths, RankDeficient if the rank condition fails.
    """
    if sys.p < sys.m:
        raise ValueError("relative degree needs at least as many outputs as inputs")
    A, B, C = sys.A, sys.B, sys.C
    n, m = sys.n, sys.m
    cnorm = scipy.linalg.norm(C, 2) or 1.0
    per = np.zeros(m, dtype=int)
    leading = np.zeros((sys.p, m))
    cols = [B[:, j].copy() for j in range(m)]
    for j in range(m):
        w = cols[j]
        for k in range(n):
            v = C @ w
            wnorm = np.linalg.norm(w)
            tol = max(sys.p, n) * _EPS * cnorm * (wnorm + 1e-300)
            if np.linalg.norm(v) > tol:
                per[j] = k + 1
                leading[:, j] = v
                break
            w = A @ w
        else:
            raise NoRelativeDegree(
                f"input column {j} has no nonzero Markov parameter up to depth {n}"
            )
    if numerical_rank(leading) < m:
        raise RankDeficient("leading Markov-parameter matrix is rank deficient")
    return RelativeDegree(per_input=tuple(int(r) for r in per))


def _pencil_zeros_square(A, B, C, D) -> list[complex]:
    """Finite generalized eigenvalues of the square system pencil."""
    n, m = A.shape[0], B.shape[1]
    M = np.block([[A, B], [C, D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    # An identically singular pencil has det(M - lam N) == 0 for every lam;
    # probe a few random points before trusting the QZ sweep.
    rng = np.random.default_rng(0)
    scale = scipy.linalg.norm(M, 2) + 1.0
    degenerate = True
    for _ in range(4):
        lam = complex(rng.normal(), rng.normal()) * scale
        sv = scipy.linalg.svdvals(M - lam * N)
        if sv[-1] > (n + m) * _EPS * max(sv[0], 1.0) * 1e3:
            degenerate = False
            break
    if degenerate:
        raise PencilDegenerate("system pencil is identically singular")
    w, _ = scipy.linalg.eig(M, N, right=True, homogeneous_eigvals=True)
    zeros: list[complex] = []
    for a, b in zip(w[0], w[1]):
        if abs(b) == 0.0:
            continue
        z = a / b
        if not np.isfinite(z.real) or not np.isfinite(z.imag):
            continue
        if abs(z) < _ZERO_MAGNITUDE_CUTOFF:
            zeros.append(complex(z))
    return zeros


def _match_zero_sets(z1: list[complex], z2: list[complex], scale: float) -> list[complex]:
    """Zeros present in both lists, paired within a relative tolerance."""
    out: list[complex] = []
    pool = list(z2)
    tol = 1e-6 * (scale + 1.0)
    for z in z1:
        best, dist = None, tol
        for i, w in enumerate(pool):
            d = abs(z - w)
            if d <= dist:
                best, dist = i, d
        if best is not None:
            out.append(z)
            pool.pop(best)
    return out


def transmission_zeros(sys: StateSpace) -> TransmissionZeroSet:
    """Transmission zeros as finite eigenvalues of the system pencil.

    Square systems use the pencil [[A - lam I, B], [C, D]] directly.
    Non-square systems are compressed to square with two independent
    random input/output mixers (seeded, so deterministic); only zeros that
    show up for both mixers are genuine, spurious ones move with the draw.
    The caller is responsible for supplying a minimal realization.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    p, m = sys.p, sys.m
    if p == m:
        zeros = _pencil_zeros_square(A, B, C, D)
    else:
        rng = np.random.default_rng(20260810)
        scale = max(abs(np.linalg.eigvals(A)).max(initial=0.0), 1.0)
        if p < m:
            # wide: mix inputs down to p
            sets = []
            for _ in range(2):
                F = rng.standard_normal((m, p))
                sets.append(_pencil_zeros_square(A, B @ F, C, D @ F))
        else:
            # tall: mix outputs down to m
            sets = []
            for _ in range(2):
                F = rng.standard_normal((m, p))
                sets.append(_pencil_zeros_square(A, B, F @ C, F @ D))
        zeros = _match_zero_sets(sets[0], sets[1], scale)
    return TransmissionZeroSet(zeros=tuple(zeros))


def _check_symmetric(M: np.ndarray, name: str):
    if not np.allclose(M, M.T, rtol=0, atol=1e-10 * (np.abs(M).max() + 1.0)):
        raise ValueError(f"{name} must be symmetric")


def solve_care(A, B, Q, R) -> np.ndarray:
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.

    Preconditions: (A, B) stabilizable, Q >= 0 symmetric, R > 0 symmetric.
    The result is symmetrized and checked to a residual below
    1e-9 * (1 + ||P||).
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    _check_symmetric(Q, "Q")
    _check_symmetric(R, "R")
    try:
        scipy.linalg.cholesky(R)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("R must be positive definite") from exc
    if not is_controllable(A, B):
        # PBH over all eigenvalues is stricter than stabilizability; retest
        # only the closed-right-half-plane modes.
        n = A.shape[0]
        for lam in np.linalg.eigvals(A):
            if lam.real >= -1e-12:
                M = np.hstack([A - lam * np.eye(n), B]).astype(complex)
                if numerical_rank_complex(M) < n:
                    raise NotStabilizable(
                        f"uncontrollable unstable mode at {lam:.6g}"
                    )
    Rinv = scipy.linalg.inv(R)
    H = np.block([[A, -B @ Rinv @ B.T], [-Q, -A.T]])
    ev = np.linalg.eigvals(H)
    axis_tol = 1e-8 * (np.abs(ev).max() + 1.0)
    if np.any(np.abs(ev.real) < axis_tol):
        raise NoStabilizingSolution(
            "Hamiltonian has eigenvalues on the imaginary axis"
        )
    try:
        P = scipy.linalg.solve_continuous_are(A, B, Q, R)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NoStabilizingSolution(str(exc)) from exc
    P = 0.5 * (P + P.T)
    residual = scipy.linalg.norm(A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P + Q)
    if residual >= 1e-9 * (1.0 + scipy.linalg.norm(P)):
        raise NoStabilizingSolution(f"Riccati residual too large: {residual:.3e}")
    return P


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solution P > 0 of A'P + PA + Q = 0 for Hurwitz A and Q > 0.

    The result is symmetrized and checked to a residual below
    1e-10 * (1 + ||P||).
    """
    A = _as_matrix(A, "A")
    Q = _as_matrix(Q, "Q")
    _check_symmetric(Q, "Q")
    if not is_hurwitz(A):
        raise NotHurwitz("A has an eigenvalue with nonnegative real part")
    P = scipy.linalg.solve_continuous_lyapunov(A.T, -Q)
    P = 0.5 * (P + P.T)
    residual = scipy.linalg.norm(A.T @ P + P @ A + Q)
    if residual >= 1e-10 * (1.0 + scipy.linalg.norm(P)):
        raise NotHurwitz(f"Lyapunov residual too large: {residual:.3e}")
    return P
