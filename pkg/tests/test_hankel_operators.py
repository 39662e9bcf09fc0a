import numpy as np
import pytest

from helpers import planted_scalar, random_innovations_model, uncorrelated_scalar
from roesser_ssi.bias import bias_closed_form, closed_form_sum, column_terms, delta_markov
from roesser_ssi.errors import GridSizeError, InputError
from roesser_ssi.grid import GridData
from roesser_ssi.hankel import (bold, build_bold, build_hankel, build_star, check_extents,
                                empirical_autocovariance)
from roesser_ssi.model import innovation_covariances
from roesser_ssi.operators import build_operators, transpose_model


def ramp(N=10, M=2):
    return GridData(np.repeat(np.arange(N + 1.0)[:, None], M + 1, axis=1))


def test_hankel_examples():
    G = ramp()
    assert np.array_equal(build_hankel(G, 0, 0, 2, 3).matrix, [[0, 1, 2], [1, 2, 3]])
    assert np.array_equal(build_hankel(G, 0, 2, 2, 3).matrix, [[2, 3, 4], [3, 4, 5]])
    assert build_hankel(G, 1, 0, 1, 4).matrix.shape == (1, 4)


def test_hankel_bounds():
    with pytest.raises(GridSizeError, match="exceeds N"):
        build_hankel(ramp(4), 0, 2, 2, 3)
    with pytest.raises(GridSizeError):
        build_hankel(ramp(), 5, 0, 2, 3)
    with pytest.raises(GridSizeError, match="2i\\+j-2"):
        check_extents(10, 2, 3)
    check_extents(10, 2, 3, strict=False)


def test_bold_slices_reproduce_blocks(rng):
    G = GridData(rng.standard_normal((12, 4, 2)))
    B = build_bold(G, 1, 3, 5)
    assert B.matrix.shape == (6, 20)
    for k in range(4):
        assert np.array_equal(B.block(k), build_hankel(G, k, 1, 3, 5).matrix)
    assert np.array_equal(bold(G, 1, 3, 5, M=0), build_hankel(G, 0, 1, 3, 5).matrix)
    assert np.array_equal(bold(G, 1, 3, 5), bold(G, 1, 3, 5))


def test_star_layout():
    B0, B1 = np.array([[1.0]]), np.array([[2.0]])
    assert np.array_equal(build_star([B0]), B0)
    assert np.array_equal(build_star([B0, B1]), [[1, 2], [0, 1]])
    with pytest.raises(InputError):
        build_star([B0, np.zeros((2, 1))])


def test_empirical_autocovariance_constant_grid():
    G = GridData(np.full((5, 4, 2), 3.0))
    assert np.allclose(empirical_autocovariance(G, 2, 1), np.full((2, 2), 9.0))


def test_operators_kronecker_forms(rng):
    m = random_innovations_model(rng, 2, 2, 2)
    ops = build_operators(m, 4, 3)
    assert ops.identity_error < 1e-12
    assert ops.Gamma_h.shape == (8, 2) and ops.Gamma_vh.shape == (8, 8)
    assert ops.bA_M_vh.shape == (8, 2 * 3) and ops.bA_M_h.shape == (2 * 4, 2 * 4)
    assert np.allclose(ops.K_h[:2, :2], np.eye(2))
    assert np.allclose(ops.G_A1, np.tril(ops.G_A1, -1))


def test_operators_single_block():
    m = uncorrelated_scalar()
    ops = build_operators(m, 1)
    assert np.allclose(ops.Gamma_h, m.C1) and np.allclose(ops.Gamma_vh, m.C2)
    assert np.allclose(ops.A_vh, m.A4) and np.allclose(ops.K_vh, m.K2)
    with pytest.raises(ValueError):
        build_operators(m, 0)


def test_transpose_model_swaps_roles(rng):
    m = random_innovations_model(rng, 2, 1, 1)
    t = transpose_model(m)
    assert (t.n_h, t.n_v) == (1, 2)
    assert np.array_equal(t.A1, m.A4) and np.array_equal(t.A2, m.A3)
    back = transpose_model(t)
    assert np.array_equal(back.A, m.A) and np.array_equal(back.K, m.K)


def test_delta_forms_agree(rng):
    for m in (uncorrelated_scalar(), random_innovations_model(rng, 2, 1, 2)):
        covs = innovation_covariances(m)
        d1 = delta_markov(m, covs, 1)
        assert np.allclose(d1.covariance_form, covs.G1)
        assert delta_markov(m, covs, 5).difference < 1e-10


def test_bias_closed_form_sum_equals_column_terms():
    m = planted_scalar()
    covs = innovation_covariances(m)
    for M in (1, 3, 6):
        ops = build_operators(m, 3, M)
        cf = bias_closed_form(m, covs, 3, M, ops)
        terms = column_terms(ops, cf.P0, cf.Q0, M)
        assert np.allclose(sum(terms), closed_form_sum(ops, cf.P0, cf.Q0, M))
        assert np.allclose(cf.inner, cf.column_sum / (M + 1))


def test_bias_is_exactly_zero_without_cross_term():
    m = uncorrelated_scalar()
    cf = bias_closed_form(m, innovation_covariances(m), 4, 3)
    assert cf.treated_as_zero
    assert not np.any(cf.crosscov) and not np.any(cf.P0) and not np.any(cf.Q0)
