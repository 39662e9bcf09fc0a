import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roesser_ssi.errors import IllConditionedError, InputError, RankDeficiencyError
from roesser_ssi.linalg import (block_hankel, block_toeplitz, hss, hss_identity, hss_kron, lttss,
                                lttss_kron, orth_complement, pseudo_inverse, rq_decompose,
                                row_space_project, solve_workers, structure_map, unvec, vec)


def test_vec_unvec_round_trip(rng):
    X = rng.standard_normal((3, 5))
    assert np.array_equal(unvec(vec(X), 3, 5), X)
    assert np.array_equal(vec(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])


def test_rq_decompose_factors(rng):
    M = rng.standard_normal((4, 9))
    L, Q, deficient = rq_decompose(M)
    assert not deficient
    assert np.allclose(L @ Q, M)
    assert np.allclose(Q @ Q.T, np.eye(4))
    assert np.allclose(L, np.tril(L))
    assert np.all(np.diag(L) >= 0)


def test_rq_decompose_flags_rank_deficiency(rng):
    M = rng.standard_normal((3, 8))
    M[2] = M[0] + M[1]
    assert rq_decompose(M).rank_deficient
    with pytest.raises(InputError):
        rq_decompose(rng.standard_normal((5, 3)))


def test_row_space_project_matches_normal_equations(rng):
    F, P = rng.standard_normal((3, 40)), rng.standard_normal((5, 40))
    ref = F @ P.T @ np.linalg.solve(P @ P.T, P)
    assert np.allclose(row_space_project(F, P), ref)
    # projecting a row-space member returns it unchanged
    assert np.allclose(row_space_project(P[:2], P), P[:2])


def test_row_space_project_ill_conditioned(rng):
    P = rng.standard_normal((3, 30))
    P[2] = P[0] + 1e-9 * rng.standard_normal(30)
    with pytest.raises(IllConditionedError):
        row_space_project(rng.standard_normal((2, 30)), P)
    out = row_space_project(rng.standard_normal((2, 30)), P, regularize=True)
    assert np.all(np.isfinite(out))


def test_orth_complement_and_pinv(rng):
    M = rng.standard_normal((6, 2))
    W = orth_complement(M)
    assert W.shape == (4, 6)
    assert np.allclose(W @ M, 0)
    assert np.allclose(W @ W.T, np.eye(4))
    assert np.allclose(pseudo_inverse(M) @ M, np.eye(2))
    with pytest.raises(InputError):
        orth_complement(rng.standard_normal((2, 3)))


def test_block_toeplitz_and_hankel_layout():
    T = block_toeplitz([np.array([[1.0]]), np.array([[2.0]]), np.array([[3.0]])])
    assert np.array_equal(T, [[1, 0, 0], [2, 1, 0], [3, 2, 1]])
    H = block_hankel([np.array([[k]]) for k in range(4)], 2)
    assert np.array_equal(H, [[0, 1, 2], [1, 2, 3]])


def test_structure_maps_expand_to_structured_matrices(rng):
    sm = structure_map("toeplitz", 2, 3, 4)
    theta = rng.standard_normal(sm.n_params)
    X = sm.expand(theta)
    blocks = [unvec(t, 2, 3) for t in theta.reshape(4, 6)]
    assert np.array_equal(X, block_toeplitz(blocks))
    # zero rows for the structural zeros above the block diagonal
    assert sm.matrix.shape[0] - sm.matrix.getnnz(axis=1).astype(bool).sum() == 6 * 6
    assert np.allclose(sm.compress(X), theta)

    hm = structure_map("hankel", 2, 1, 3, 5)
    theta = rng.standard_normal(hm.n_params)
    assert hm.n_params == 2 * 7
    assert np.array_equal(hm.expand(theta), block_hankel(list(theta.reshape(7, 2, 1)), 3))


def test_structure_map_errors():
    with pytest.raises(InputError):
        structure_map("circulant", 1, 1, 2)
    with pytest.raises(InputError):
        structure_map("hankel", 1, 1, 2)


def test_lttss_recovers_planted_and_matches_kron(rng):
    X = block_toeplitz([rng.standard_normal((2, 3)) for _ in range(4)])
    A, B = rng.standard_normal((10, 8)), rng.standard_normal((12, 15))
    C = A @ X @ B
    est = lttss(A, B, C, 2, 3, 4)
    assert np.allclose(est, X, atol=1e-10)
    Cn = C + 0.1 * rng.standard_normal(C.shape)
    assert np.allclose(lttss(A, B, Cn, 2, 3, 4), lttss_kron(A, B, Cn, 2, 3, 4))


def test_lttss_output_is_exactly_toeplitz(rng):
    A, B, C = rng.standard_normal((6, 6)), rng.standard_normal((6, 9)), rng.standard_normal((6, 9))
    X = lttss(A, B, C, 2, 2, 3)
    assert np.array_equal(X[:2, 2:], np.zeros((2, 4)))
    assert np.array_equal(X[2:4, 2:4], X[:2, :2])
    assert np.array_equal(X[4:6, 4:6], X[:2, :2])
    assert np.array_equal(X[4:6, 2:4], X[2:4, :2])


def test_lttss_rank_deficient(rng):
    A = np.zeros((4, 4))
    with pytest.raises(RankDeficiencyError):
        lttss(A, np.eye(4), np.ones((4, 4)), 2, 2, 2)


def test_hss_general_and_identity_paths(rng):
    X = block_hankel([rng.standard_normal((2, 1)) for _ in range(3 + 6 - 1)], 3)
    A = rng.standard_normal((9, 6))
    assert np.allclose(hss(A, None, A @ X, 2, 1, 3, 6), X)
    B = rng.standard_normal((6, 8))
    assert np.allclose(hss(A, B, A @ X @ B, 2, 1, 3, 6), X)
    C = rng.standard_normal((9, 8))
    assert np.allclose(hss(A, B, C, 2, 1, 3, 6), hss_kron(A, B, C, 2, 1, 3, 6))
    C = rng.standard_normal((9, 6))
    assert np.allclose(hss(A, None, C, 2, 1, 3, 6), hss_kron(A, np.eye(6), C, 2, 1, 3, 6))


def test_hss_identity_fixed_leading_and_batches(rng):
    i, j, br, K = 3, 7, 2, 4
    gens = rng.standard_normal((i + j - 1, br, K))
    A = rng.standard_normal((8, br * i))
    C = np.stack([A @ block_hankel(list(gens[:, :, k, None]), i) for k in range(K)], axis=2)
    assert np.allclose(hss_identity(A, C, br, i, j), gens)
    fixed = gens[:2] + 1.0
    out = hss_identity(A, C, br, i, j, fixed_leading=fixed)
    assert np.array_equal(out[:2], fixed)


def test_solve_workers_is_bit_identical(rng):
    A = rng.standard_normal((12, 8))
    C = rng.standard_normal((12, 30, 9))
    ref = hss_identity(A, C, 2, 4, 30)
    with solve_workers(4):
        par = hss_identity(A, C, 2, 4, 30)
    assert np.array_equal(ref, par)


@settings(max_examples=30, deadline=None)
@given(br=st.integers(1, 3), bc=st.integers(1, 3), i=st.integers(1, 4),
       seed=st.integers(0, 2**32 - 1))
def test_lttss_fixed_point_property(br, bc, i, seed):
    rng = np.random.default_rng(seed)
    X = block_toeplitz([rng.standard_normal((br, bc)) for _ in range(i)])
    A = rng.standard_normal((br * i + 2, br * i))
    B = rng.standard_normal((bc * i, bc * i + 2))
    assert np.allclose(lttss(A, B, A @ X @ B, br, bc, i), X, atol=1e-8)
