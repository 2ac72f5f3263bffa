import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drfb import sdp
from drfb.errors import DimensionError

from sdp_library import analytic_problems


def block(const, *coeffs, name=""):
    const = np.atleast_2d(np.asarray(const, dtype=float))
    s = const.shape[0]
    return sdp.AffineBlock(const, np.array(coeffs, dtype=float).reshape(-1, s, s), name)


def _cubic_eigs(a):
    """Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric root formula)."""
    q = np.trace(a) / 3
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6)
    if p == 0:
        return np.full(3, q)
    b = (a - q * np.eye(3)) / p
    r = max(-1.0, min(1.0, np.linalg.det(b) / 2))
    phi = math.acos(r) / 3
    e1 = q + 2 * p * math.cos(phi)
    e3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return np.sort([e1, 3 * q - e1 - e3, e3])


# --- min_eig ---------------------------------------------------------------

def test_min_eig_examples():
    assert sdp.min_eig(np.eye(4)) == 1.0
    assert sdp.min_eig(np.diag([3.0, -2.0])) == -2.0
    with pytest.raises(DimensionError):
        sdp.min_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_min_eig_against_cubic_formula():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = rng.normal(size=(5, 5))
        a = (g + g.T) / 2
        sub = a[:3, :3]
        assert sdp.min_eig(sub) == pytest.approx(_cubic_eigs(sub)[0], abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-1e3, 1e3)))
def test_min_eig_matches_lapack(g):
    a = (g + g.T) / 2
    ref = np.linalg.eigvalsh(a)[0]
    assert sdp.min_eig(a) == pytest.approx(ref, abs=1e-10 * max(1.0, np.abs(a).max()))


# --- problem validation ----------------------------------------------------

def test_problem_validation():
    with pytest.raises(DimensionError):
        block([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionError):
        sdp.SdpProblem(2, [1.0], [])
    with pytest.raises(DimensionError):
        sdp.SdpProblem(65, np.zeros(65), [])
    with pytest.raises(DimensionError):
        sdp.SdpProblem(1, [1.0], [block(np.eye(9), np.eye(9))])


# --- phase 1 ----------------------------------------------------------------

def test_phase1_identity_block():
    res = sdp.phase1(sdp.SdpProblem(1, [0.0], [block(np.eye(2), np.zeros((2, 2)))]))
    assert res.s == pytest.approx(-1.0, abs=1e-8)
    assert res.feasible


def test_phase1_negative_identity_no_variables():
    p = sdp.SdpProblem(0, np.zeros(0), [sdp.AffineBlock(-np.eye(2), np.zeros((0, 2, 2)))])
    res = sdp.phase1(p)
    assert res.s == pytest.approx(1.0, abs=1e-8)
    assert not res.feasible
    assert sdp.solve(p).status == "infeasible"


def test_phase1_finds_strict_point():
    # x1 >= 1, x2 >= 2, x1 + x2 <= 4
    p = sdp.SdpProblem(2, [1.0, 1.0], [block(-np.diag([1.0, 2.0]), np.diag([1.0, 0]), np.diag([0, 1.0])),
                                       block([[4.0]], [[-1.0]], [[-1.0]])])
    res = sdp.phase1(p)
    assert res.feasible
    assert all(sdp.min_eig(b(res.x)) > 0 for b in p.blocks)


# --- solve --------------------------------------------------------------------

def test_solve_one_by_one_cone():
    sol = sdp.solve(sdp.SdpProblem(1, [1.0], [block([[0.0]], [[1.0]])]))
    assert sol.status == "optimal"
    assert abs(sol.x[0]) <= 1e-7


def test_solve_diagonal_bound():
    p = sdp.SdpProblem(2, [1.0, 1.0], [block(-np.eye(2), np.diag([1.0, 0]), np.diag([0, 1.0]))])
    sol = sdp.solve(p)
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-7)


def test_solve_two_by_two_psd():
    sol = sdp.solve(sdp.SdpProblem(1, [1.0], [block(np.eye(2), [[0, 1.0], [1.0, 0]])]))
    assert sol.x[0] == pytest.approx(-1.0, abs=1e-7)


def test_solve_infeasible_and_stalled():
    # x >= 1 and x <= -1
    p = sdp.SdpProblem(1, [1.0], [block([[-1.0]], [[1.0]]), block([[-1.0]], [[-1.0]])])
    assert sdp.solve(p).status == "infeasible"
    p = sdp.SdpProblem(1, [1.0], [block([[0.0]], [[1.0]])])
    assert sdp.solve(p, tol=1e-12, max_iter=2).status == "stalled"


def test_box_bounds_become_blocks():
    p = sdp.SdpProblem(2, [1.0, -1.0], [], var_bounds=([0.5, -np.inf], [np.inf, 3.0]))
    assert len(p.all_blocks()) == 2
    sol = sdp.solve(p)
    np.testing.assert_allclose(sol.x, [0.5, 3.0], atol=1e-7)


def test_monotone_history_and_determinism(tmp_path):
    p = analytic_problems()[10][0]
    a = sdp.solve(p, debug_csv=tmp_path / "it.csv")
    b = sdp.solve(p)
    assert np.all(np.diff(a.history) <= 1e-12)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.history == b.history
    lines = (tmp_path / "it.csv").read_text().splitlines()
    assert lines[0] == "outer_iteration,objective" and len(lines) == len(a.history) + 1


@pytest.mark.parametrize("k", range(20))
def test_analytic_library(k):
    problem, optimum = analytic_problems()[k]
    sol = sdp.solve(problem)
    assert sol.status == "optimal"
    assert abs(sol.objective_value - optimum) <= 1e-6
    assert min(sol.block_min_eigs) >= -1e-8


def test_random_problems_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(11)
    for _ in range(5):
        n, s = 3, 4
        coeffs = [(lambda g: (g + g.T) / 2)(rng.normal(size=(s, s))) for _ in range(n)]
        # bounded feasible set: F(x) = I + sum x_k A_k >= 0 and |x| <= 2
        const = np.eye(s)
        c = rng.normal(size=n)
        prob = sdp.SdpProblem(n, c, [block(const, *coeffs)], var_bounds=(-2.0, 2.0))
        ours = sdp.solve(prob)
        x = cp.Variable(n)
        expr = const + sum(x[k] * coeffs[k] for k in range(n))
        ref = cp.Problem(cp.Minimize(c @ x), [expr >> 0, x >= -2, x <= 2])
        ref.solve(solver="CLARABEL")
        assert ours.objective_value == pytest.approx(ref.value, abs=1e-6)
