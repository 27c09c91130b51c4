"""Linear-systems kernel: relative degree, zeros, Riccati, Lyapunov."""

import numpy as np
import pytest
import scipy.linalg

from adaptlim.errors import (
    NoRelativeDegree,
    NoStabilizingSolution,
    NotHurwitz,
    NotStabilizable,
    PencilDegenerate,
    RankDeficient,
)
from adaptlim.linalg import (
    StateSpace,
    input_relative_degree,
    solve_care,
    solve_lyapunov,
    transmission_zeros,
)


def test_relative_degree_double_integrator():
    sys = StateSpace([[0, 1], [0, 0]], [[0], [1]], [[1, 0]])
    rd = input_relative_degree(sys)
    assert rd.per_input == (2,)
    assert rd.uniform == 2


def test_relative_degree_first_order():
    rd = input_relative_degree(StateSpace([[-1]], [[1]], [[1]]))
    assert rd.per_input == (1,)
    assert rd.uniform == 1


def test_relative_degree_three_state_chain():
    # C picks state 1, input enters state 3: C B = 0, C A B = 0, C A^2 B = 1
    A = [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
    rd = input_relative_degree(StateSpace(A, [[0], [0], [1]], [[1, 0, 0]]))
    assert rd.per_input == (3,)
    assert rd.uniform == 3


def test_relative_degree_no_markov():
    # input feeds a subspace invisible to the output for every power of A
    A = np.diag([-1.0, -2.0])
    sys = StateSpace(A, [[0], [1]], [[1, 0]])
    with pytest.raises(NoRelativeDegree):
        input_relative_degree(sys)


def test_relative_degree_rank_deficient():
    # two inputs whose leading Markov vectors are collinear
    A = np.zeros((2, 2))
    B = np.array([[1.0, 2.0], [0.0, 0.0]])
    C = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(RankDeficient):
        input_relative_degree(StateSpace(A, B, C))


def test_relative_degree_nonuniform():
    # first input relative degree 2 (through the chain), second direct
    A = [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
    B = [[0, 1], [0, 0], [1, 0]]
    C = [[1, 0, 0], [0, 1, 0]]
    rd = input_relative_degree(StateSpace(A, B, C))
    assert rd.per_input == (2, 1)
    assert rd.uniform is None


def test_zeros_siso_stable():
    # transfer (s+2)/(s+1)^2
    zs = transmission_zeros(StateSpace([[0, 1], [-1, -2]], [[0], [1]], [[2, 1]]))
    assert len(zs.zeros) == 1
    assert zs.zeros[0] == pytest.approx(-2.0, abs=1e-9)
    assert zs.all_stable


def test_zeros_first_order_none():
    zs = transmission_zeros(StateSpace([[-1]], [[1]], [[1]]))
    assert zs.zeros == ()
    assert zs.all_stable


def test_zeros_siso_unstable():
    # transfer (s-2)/(s+1)^2
    zs = transmission_zeros(StateSpace([[0, 1], [-1, -2]], [[0], [1]], [[-2, 1]]))
    assert zs.zeros[0] == pytest.approx(2.0, abs=1e-9)
    assert not zs.all_stable


def _numerator_roots(A, b, c):
    """Roots of the transfer-function numerator via the pencil determinant
    expanded with polynomial arithmetic (independent oracle)."""
    n = A.shape[0]
    # numerator polynomial = det([[sI - A, -b], [c, 0]]) up to sign; build by
    # Laplace expansion over sampled points and polynomial fit
    pts = np.exp(2j * np.pi * np.arange(2 * n + 1) / (2 * n + 1)) * 2.0
    vals = []
    for s in pts:
        M = np.block([[s * np.eye(n) - A, -b.reshape(n, 1)],
                      [c.reshape(1, n), np.zeros((1, 1))]])
        vals.append(np.linalg.det(M))
    coeffs = np.polyfit(pts, vals, n)
    big = np.abs(coeffs).max()
    keep = np.where(np.abs(coeffs) > 1e-8 * big)[0]
    if keep.size == 0:
        return np.array([])
    coeffs = coeffs[keep[0]:]
    if len(coeffs) <= 1:
        return np.array([])
    return np.roots(coeffs)


def test_zeros_match_numerator_roots_random_siso():
    rng = np.random.default_rng(7)
    for _ in range(12):
        n = rng.integers(2, 5)
        A = rng.standard_normal((n, n))
        A -= (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)
        b = rng.standard_normal(n)
        c = rng.standard_normal(n)
        zs = transmission_zeros(StateSpace(A, b.reshape(n, 1), c.reshape(1, n)))
        got = list(zs.zeros)
        want = list(_numerator_roots(A, b, c))
        assert len(got) == len(want)
        tol = 1e-6 * (1 + max((abs(w) for w in want), default=0.0))
        for z in got:
            dists = [abs(z - w) for w in want]
            k = int(np.argmin(dists))
            assert dists[k] < tol
            want.pop(k)


def test_zeros_degenerate_pencil():
    # duplicated output rows make the pencil identically singular
    A = np.array([[-1.0, 0.0], [0.0, -2.0]])
    B = np.array([[1.0, 1.0], [1.0, 1.0]])
    C = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(PencilDegenerate):
        transmission_zeros(StateSpace(A, B, C))


def test_zeros_wide_system_via_compression():
    # one output, two inputs; zero of the first channel only survives if
    # it is common to every input mix, so a wide system is generically
    # zero-free
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    C = np.array([[1.0, 0.0]])
    zs = transmission_zeros(StateSpace(A, B, C))
    assert zs.zeros == ()
    assert zs.all_stable


def test_care_scalar():
    P = solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_care_stable_zero_cost():
    P = solve_care([[-1.0]], [[1.0]], [[0.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_care_double_integrator_known_solution():
    # exact solution [[sqrt(3), 1], [1, sqrt(3)]]
    A = [[0.0, 1.0], [0.0, 0.0]]
    B = [[0.0], [1.0]]
    P = solve_care(A, B, np.eye(2), [[1.0]])
    s3 = np.sqrt(3.0)
    assert np.allclose(P, [[s3, 1.0], [1.0, s3]], atol=1e-9)


def _care_hamiltonian_oracle(A, B, Q, R):
    """Stabilizing Riccati solution from the Hamiltonian eigenvectors."""
    n = A.shape[0]
    H = np.block([[A, -B @ np.linalg.inv(R) @ B.T], [-Q, -A.T]])
    w, V = np.linalg.eig(H)
    idx = np.where(w.real < 0)[0]
    U = V[:, idx]
    P = U[n:] @ np.linalg.inv(U[:n])
    P = np.real(P)
    return 0.5 * (P + P.T)


def test_care_random_against_hamiltonian_oracle():
    rng = np.random.default_rng(3)
    for _ in range(8):
        n, m = 4, 2
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        Qh = rng.standard_normal((n, n))
        Q = Qh @ Qh.T + 0.1 * np.eye(n)
        R = np.eye(m)
        P = solve_care(A, B, Q, R)
        P_oracle = _care_hamiltonian_oracle(A, B, Q, R)
        assert np.allclose(P, P_oracle, atol=1e-7 * (1 + np.linalg.norm(P_oracle)))
        # closed loop must be stable
        K = np.linalg.solve(R, B.T @ P)
        assert np.all(np.linalg.eigvals(A - B @ K).real < 0)


def test_care_not_stabilizable():
    # unstable mode decoupled from the input
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(NotStabilizable):
        solve_care(A, B, np.eye(2), [[1.0]])


def test_care_imaginary_axis_hamiltonian():
    # a = 0, b = 1, q = 0: Hamiltonian eigenvalues at 0
    with pytest.raises((NoStabilizingSolution, NotStabilizable)):
        solve_care([[0.0]], [[1.0]], [[0.0]], [[1.0]])


def test_lyapunov_scalar():
    P = solve_lyapunov([[-1.0]], [[2.0]])
    assert P[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_lyapunov_diagonal():
    P = solve_lyapunov(-np.eye(2), np.eye(2))
    assert np.allclose(P, 0.5 * np.eye(2), atol=1e-14)


def test_lyapunov_not_hurwitz():
    with pytest.raises(NotHurwitz):
        solve_lyapunov([[1.0]], [[1.0]])


def _lyapunov_quadrature_oracle(A, Q, T=60.0, steps=6000):
    """Integral form of the Lyapunov solution by composite Simpson rule."""
    ts = np.linspace(0.0, T, steps + 1)
    h = ts[1] - ts[0]
    acc = np.zeros_like(A)
    for i, t in enumerate(ts):
        E = scipy.linalg.expm(A * t)
        term = E.T @ Q @ E
        w = 1.0 if i in (0, steps) else (4.0 if i % 2 == 1 else 2.0)
        acc = acc + w * term
    return acc * (h / 3.0)


def test_lyapunov_random_against_quadrature_oracle():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((4, 4))
    A -= (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(4)
    Qh = rng.standard_normal((4, 4))
    Q = Qh @ Qh.T + 0.2 * np.eye(4)
    P = solve_lyapunov(A, Q)
    P_oracle = _lyapunov_quadrature_oracle(A, Q)
    assert np.allclose(P, P_oracle, rtol=1e-6, atol=1e-8)


def test_lyapunov_symmetric_and_positive_definite():
    rng = np.random.default_rng(5)
    for _ in range(6):
        A = rng.standard_normal((5, 5))
        A -= (np.max(np.linalg.eigvals(A).real) + 0.7) * np.eye(5)
        Q = np.eye(5)
        P = solve_lyapunov(A, Q)
        assert np.array_equal(P, P.T)
        scipy.linalg.cholesky(P)  # raises if not positive definite


def test_uniform_degree_two_markov_structure():
    # any uniform-relative-degree-two system has C B = 0 and C A B full rank
    rng = np.random.default_rng(13)
    A = rng.standard_normal((4, 4))
    B = np.array([[0.0], [0.0], [0.0], [1.0]])
    C = np.zeros((1, 4))
    # craft C so that C B = 0 but C A B != 0
    C[0, :] = rng.standard_normal(4)
    C[0, 3] = 0.0
    if abs((C @ A @ B)[0, 0]) < 1e-3:
        A[2, 3] += 1.0
        C[0, 2] = 1.0
    sys = StateSpace(A, B, C)
    rd = input_relative_degree(sys)
    if rd.uniform == 2:
        assert np.allclose(C @ B, 0.0)
        assert np.linalg.matrix_rank(C @ A @ B) == 1
