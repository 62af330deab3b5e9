import numpy as np
import pytest

from conftest import small_instance
from rcrtr.oracle import dense_kkt_solve, dense_shifted_kkt
from rcrtr.rcr import (
    CurvatureError,
    PairMemory,
    SingularMiddleError,
    apply_V,
    apply_V_sigma,
    assemble_N,
    assemble_N_sigma,
    col_update,
    init_memory,
    model_curvature,
    prod_update,
    update_memory,
)


def e(i, n=4):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def test_col_update_cases():
    a, b, v = np.ones(3), 2 * np.ones(3), 3 * np.ones(3)
    np.testing.assert_array_equal(col_update(None, v, 5), v[:, None])
    np.testing.assert_array_equal(col_update(np.column_stack([a, b]), v, 2), np.column_stack([b, v]))
    np.testing.assert_array_equal(col_update(np.column_stack([a]), v, 2), np.column_stack([a, v]))


def test_col_update_replay(rng):
    M, vs = None, []
    for _ in range(8):
        v = rng.standard_normal(4)
        vs.append(v)
        M = col_update(M, v, 5)
    np.testing.assert_array_equal(M, np.column_stack(vs[-5:]))


def test_prod_update_D_and_T(rng):
    S = rng.standard_normal((6, 2))
    Z = rng.standard_normal((6, 2))
    s, z = rng.standard_normal(6), rng.standard_normal(6)
    D = np.diag(np.diag(S.T @ Z))
    D2 = prod_update(D, None, None, s, z, 5)
    np.testing.assert_allclose(D2, np.diag([*np.diag(D), s @ z]))
    T = np.triu(S.T @ Z)
    T2 = prod_update(T, S, None, s, z, 5)
    np.testing.assert_allclose(T2[:2, 2], S.T @ z)
    np.testing.assert_array_equal(T2[2, :2], 0.0)


def test_prod_update_shift_matches_recompute(rng):
    S, Z, G = None, None, np.zeros((0, 0))
    for _ in range(3):
        s, z = rng.standard_normal(7), rng.standard_normal(7)
        G = prod_update(G, S, Z, s, z, 2)
        S, Z = col_update(S, s, 2), col_update(Z, z, 2)
    np.testing.assert_allclose(G, S.T @ Z, atol=1e-12)


def test_init_memory_unit_vectors():
    mem = init_memory(e(0), e(0), e(0))
    for name in ("D", "T", "ZtZ", "StS", "StZ"):
        np.testing.assert_array_equal(getattr(mem, name), [[1.0]])
    np.testing.assert_array_equal(mem.L, [[0.0]])
    assert mem.delta == 1.0 and mem.k == 1


def test_init_memory_rejects_bad_curvature():
    with pytest.raises(CurvatureError):
        init_memory(e(0), -e(0), e(0))


def test_skip_leaves_memory_unchanged(rng):
    mem = init_memory(e(0), e(0), 2 * e(0))
    before = mem.copy()
    assert not update_memory(mem, e(1), -e(1), e(1))
    assert mem.skipped == 1 and mem.delta == before.delta
    for name in ("S", "Z", "D", "T", "L", "ZtZ", "StS", "StZ"):
        np.testing.assert_array_equal(getattr(mem, name), getattr(before, name))


def test_eviction_consistent(rng):
    mem = PairMemory(10, l=3)
    pairs = []
    for _ in range(4):
        s = rng.standard_normal(10)
        z = s + 0.1 * rng.standard_normal(10)
        assert mem.update(s, z, z)
        pairs.append((s, z))
    np.testing.assert_array_equal(mem.S, np.column_stack([p[0] for p in pairs[1:]]))
    assert mem.recompute_error() <= 1e-12
    StZ = mem.S.T @ mem.Z
    np.testing.assert_allclose(mem.L + mem.T, StZ, atol=1e-12)


def test_assemble_N_scalar():
    mem = init_memory(e(0), e(0), e(0))
    np.testing.assert_allclose(assemble_N(mem).N, [[2.0, -1.0], [-1.0, 0.0]])


def test_N_at_zero_shift_coincides(instance):
    _, mem, _, _ = instance
    N = assemble_N(mem).N
    np.testing.assert_allclose(assemble_N_sigma(mem, 0.0).N, N, atol=1e-12 * max(1, abs(N).max()))
    np.testing.assert_allclose(N, N.T, atol=1e-12 * max(1, abs(N).max()))


def test_negative_sigma_rejected(instance):
    with pytest.raises(ValueError):
        assemble_N_sigma(instance[1], -1.0)


def test_singular_middle_error_carries_sigma():
    err = SingularMiddleError(0.25)
    assert err.sigma == 0.25 and "0.25" in str(err)


def test_apply_V_matches_kkt(instance, rng):
    A, mem, P, B = instance
    g = rng.standard_normal(mem.n)
    s = -apply_V(mem, assemble_N(mem), g, P @ g)
    ref = dense_kkt_solve(B, A, g).s
    assert np.linalg.norm(s - ref) <= 1e-8 * np.linalg.norm(ref)
    assert np.linalg.norm(A @ s) <= 1e-7 * (1 + np.linalg.norm(s))


@pytest.mark.parametrize("sigma", [0.3, 2.0, 9.5])
def test_apply_V_sigma_matches_shifted_kkt(instance, rng, sigma):
    A, mem, P, B = instance
    g = rng.standard_normal(mem.n)
    Ns = assemble_N_sigma(mem, sigma)
    s = -apply_V_sigma(mem, Ns, Ns.tau, g, P @ g)
    ref = dense_shifted_kkt(B, sigma, A, -g).s
    assert np.linalg.norm(s - ref) <= 1e-8 * np.linalg.norm(ref)


def test_apply_V_empty_memory_and_shapes(rng):
    mem = PairMemory(5, delta=0.5)
    gP = rng.standard_normal(5)
    np.testing.assert_allclose(apply_V(mem, assemble_N(mem), gP, gP), 0.5 * gP)
    np.testing.assert_allclose(apply_V_sigma(mem, np.zeros((0, 0)), 4.0, gP, gP), gP / 4)
    with pytest.raises(ValueError):
        apply_V(mem, assemble_N(mem), np.ones(4), np.ones(4))


def test_V_kills_range_of_At(instance, rng):
    A, mem, P, _ = instance
    g = A.T @ rng.standard_normal(A.shape[0])
    # the stored columns lie in null(A), so SZ'g vanishes as well
    assert np.abs(mem.SZ.T @ g).max() <= 1e-10 * np.linalg.norm(g) * np.abs(mem.SZ).max()
    v = apply_V(mem, assemble_N(mem), g, P @ g)
    assert np.linalg.norm(v) <= 1e-10 * np.linalg.norm(g)


def test_large_sigma_asymptotics(instance, rng):
    _, mem, P, _ = instance
    g = rng.standard_normal(mem.n)
    gP = P @ g
    for sigma in (1e4, 1e6):
        Ns = assemble_N_sigma(mem, sigma)
        v = apply_V_sigma(mem, Ns, Ns.tau, g, gP)
        assert np.linalg.norm(v) * Ns.tau == pytest.approx(np.linalg.norm(gP), rel=1e-2)


def test_model_curvature_matches_dense(rng):
    for _ in range(20):
        _, mem, P, B = small_instance(rng)
        s = P @ rng.standard_normal(mem.n)
        assert model_curvature(mem, s) == pytest.approx(s @ B @ s, rel=1e-8)


def test_projected_identity(instance):
    _, mem, P, _ = instance
    N = assemble_N(mem)
    V = np.column_stack([apply_V(mem, N, c, P @ c) for c in np.eye(mem.n)])
    assert np.linalg.norm(P.T @ V @ P - V) <= 1e-9 * np.linalg.norm(V)


def test_ill_conditioned_T_flagged():
    mem = PairMemory(3)
    mem.update(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]))
    mem.update(np.array([1.0, 1e-13, 0]), np.array([1e-13, 1e-13, 0]), np.array([1.0, 1, 0]))
    mem.T[1, 1] = 1e-14  # force a nearly singular T
    assert assemble_N(mem).ill_conditioned


def test_drop_oldest(instance):
    mem = instance[1].copy()
    k = mem.k
    mem.drop_oldest()
    assert mem.k == k - 1 and mem.recompute_error() <= 1e-12
    empty = PairMemory(3)
    empty.drop_oldest()
    assert empty.k == 0
