import numpy as np
import pytest

from conftest import small_instance
from rcrtr.oracle import (
    bfgs_dense,
    brute_sc_subproblem,
    check_ctgc_structure,
    dense_kkt_solve,
    dense_nullspace_step,
    dense_projector,
    dense_shifted_kkt,
    dense_V,
    inverse_bfgs_dense,
    random_rcr_instance,
)


def test_kkt_hand_example():
    sol = dense_kkt_solve(np.eye(2), np.array([[1.0, 0.0]]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(sol.s, [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(sol.lam, [-1.0], atol=1e-15)
    assert sol.residual <= 1e-14


def test_kkt_zero_gradient(rng):
    A = rng.standard_normal((2, 5))
    sol = dense_kkt_solve(np.eye(5), A, np.zeros(5))
    assert not sol.s.any() and not sol.lam.any()


def test_kkt_singular_detected():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(np.linalg.LinAlgError):
        dense_kkt_solve(np.eye(2), A, np.ones(2))


def test_bfgs_and_inverse_agree(rng):
    A, S, Y, delta, _ = random_rcr_instance(rng, 12, 3, 4)
    B = bfgs_dense(S, Y, delta)
    H = inverse_bfgs_dense(S, Y, delta)
    np.testing.assert_allclose(B @ H, np.eye(12), atol=1e-9)
    # BFGS keeps the secant equation for the newest pair
    np.testing.assert_allclose(B @ S[:, -1], Y[:, -1], atol=1e-9)


def test_three_dense_routes_agree(rng):
    for _ in range(30):
        A, mem, P, B = small_instance(rng)
        g = rng.standard_normal(mem.n)
        s1 = dense_kkt_solve(B, A, g).s
        s2 = -dense_V(np.linalg.inv(B), A) @ g
        s3 = dense_nullspace_step(B, A, g)
        scale = np.linalg.norm(s1)
        assert np.linalg.norm(s1 - s2) <= 1e-9 * scale
        assert np.linalg.norm(s1 - s3) <= 1e-9 * scale


def test_dense_V_properties(rng):
    A, mem, P, B = small_instance(rng, 20, 6, 3)
    V = dense_V(np.linalg.inv(B), A)
    assert np.abs(V @ A.T).max() <= 1e-10 * max(1, np.abs(V).max())
    assert np.linalg.norm(P.T @ V @ P - V) <= 1e-9 * np.linalg.norm(V)


def test_shifted_derivative_matches_fd(rng):
    A, mem, P, B = small_instance(rng, 15, 4, 3)
    g = rng.standard_normal(15)
    sig, h = 0.8, 1e-6
    s = dense_shifted_kkt(B, sig, A, -g).s
    ds = dense_shifted_kkt(B, sig, A, -s).s
    fd = (dense_shifted_kkt(B, sig + h, A, -g).s - dense_shifted_kkt(B, sig - h, A, -g).s) / (2 * h)
    assert np.linalg.norm(ds - fd) <= 1e-6 * np.linalg.norm(ds)
    np.testing.assert_allclose(dense_shifted_kkt(B, 0.0, A, -g).s, dense_kkt_solve(B, A, g).s)


def test_ctgc_trivial_cases(rng):
    A = rng.standard_normal((3, 10))
    rep = check_ctgc_structure(np.zeros((10, 0)), np.zeros((10, 0)), 1.0, A)
    assert rep["off_block"] == 0.0 and rep["block11_error"] == 0.0
    # A Y = 0: every block vanishes
    P = dense_projector(A)
    S = P @ rng.standard_normal((10, 2))
    Y = S * 2.0
    rep = check_ctgc_structure(S, Y, 0.5, A)
    assert rep["scale"] == pytest.approx(1.0)
    assert rep["off_block"] <= 1e-12 and rep["block11_error"] <= 1e-12


def test_ctgc_random(rng):
    for _ in range(10):
        A, S, Y, delta, _ = random_rcr_instance(rng, 20, 6, 3)
        rep = check_ctgc_structure(S, Y, delta, A)
        assert rep["off_block"] <= 1e-10 and rep["block11_error"] <= 1e-9


def test_brute_subproblem_unclipped():
    u = np.array([0.5, -0.2])
    lam = np.array([0.3, 1.0])
    val, v2, t = brute_sc_subproblem(u, lam, 0.4, 1.0, 100.0)
    np.testing.assert_allclose(v2, -(1.0 + lam) * u, atol=1e-7)
    assert t == pytest.approx(0.4, abs=1e-7)
    expected = float(np.sum(-0.5 * (1 + lam) * u**2)) - 0.5 * 0.4**2
    assert val == pytest.approx(expected, abs=1e-10)
