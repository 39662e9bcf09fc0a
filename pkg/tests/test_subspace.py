import numpy as np
import pytest

from helpers import random_innovations_model, uncorrelated_scalar
from roesser_ssi.errors import (GridSizeError, InputError, OrderSelectionError,
                                RankDeficiencyError)
from roesser_ssi.grid import GridData
from roesser_ssi.hankel import bold
from roesser_ssi.model import RoesserModel, propagate, simulate
from roesser_ssi.operators import build_operators
from roesser_ssi.subspace import (assemble_states, from_generators, identify, recover_parameters,
                                  recover_innovations_operator, regress_dynamics, select_order,
                                  stage1_project, stage1_states, stage2_rq, to_batches,
                                  vertical_sizes)
from roesser_ssi.subspace.oracle import oracle_residuals


@pytest.fixture(scope="module")
def scalar_run():
    m = uncorrelated_scalar()
    i, j, M = 4, 400, 12
    return m, simulate(m, 2 * i + j - 2, M, 5), i, j


def test_batches_and_generators_round_trip(rng):
    gens = rng.standard_normal((3 + 5 - 1, 2, 4))
    H = from_generators(gens, 3)
    assert H.shape == (6, 20)
    B = to_batches(H, 5)
    assert B.shape == (6, 5, 4)
    assert np.array_equal(B[:2, :, 1], gens[:5, :, 1].T)
    assert np.array_equal(B[2:4, 0, 3], gens[1, :, 3])


def test_select_order():
    assert select_order([10.0, 9.0, 0.1, 0.09], 3) == 2
    with pytest.raises(OrderSelectionError) as info:
        select_order([1.0, 0.9, 0.8, 0.7], 3)
    assert info.value.singular_values is not None


def test_stage1_zero_data_has_order_zero():
    proj = stage1_project(GridData(np.zeros((10, 3, 1))), 3, 5)
    assert proj.zero_data and proj.n == 0
    assert stage1_states(GridData(np.zeros((10, 3, 1))), proj).values.shape == (10, 3, 0)


def test_stage1_rank_on_noise_free_data(rng):
    # no innovations, no vertical states: y[r, s] = C1 A1^r xh[0, s]
    m = RoesserModel(2, 0, 1, [[0.6, 0.3], [-0.2, 0.5]], np.zeros((2, 0)), np.zeros((0, 2)),
                     np.zeros((0, 0)), [[1.0, 0.5]], np.zeros((1, 0)),
                     K1=np.zeros((2, 1)), K2=np.zeros((0, 1)), Re=[[1.0]])
    i, j, M = 4, 40, 30
    Y, _, _ = propagate(m, np.zeros((2 * i + j - 1, M + 1, 1)),
                        xh0=rng.standard_normal((M + 1, 2)))
    proj = stage1_project(GridData(Y), i, j)
    assert proj.n == 2
    assert proj.singular_values[2] < 1e-10 * proj.singular_values[0]


def test_stage1_shift_invariance_recovers_a1(scalar_run):
    m, sim, i, j = scalar_run
    proj = stage1_project(sim.Y, i, j, order=1)
    G = proj.Gamma
    a1 = np.linalg.lstsq(G[:-1], G[1:], rcond=None)[0][0, 0]
    assert abs(a1 - 0.5) < 0.05


def test_stage1_grid_size_error():
    with pytest.raises(GridSizeError):
        stage1_project(GridData(np.zeros((11, 3, 1))), 3, 5)
    with pytest.raises(InputError):
        stage1_project(GridData(np.ones((10, 3, 1))), 3, 5, direction="diagonal")


def test_stage1_states_shape_and_boundary(scalar_run):
    _, sim, i, j = scalar_run
    proj = stage1_project(sim.Y, i, j, order=1)
    X = stage1_states(sim.Y, proj)
    assert X.values.shape == sim.Y.values.shape[:2] + (1,)
    assert not np.any(X.values[0])


def test_oracle_stages_exact(scalar_run):
    m, sim, i, j = scalar_run
    res = oracle_residuals(m, sim, i, j)
    assert max(res.values()) < 1e-9, res


def test_oracle_stages_exact_multivariable(rng):
    m = random_innovations_model(rng, 2, 1, 2, rho=0.6)
    i, j, M = 3, 300, 6
    res = oracle_residuals(m, simulate(m, 2 * i + j - 2, M, 1), i, j)
    assert max(res.values()) < 1e-8, res


def test_stage2_rq_round_trip_and_rank_check(scalar_run):
    m, sim, i, j = scalar_run
    Xf, Xp = bold(sim.Xv, i, i, j), bold(sim.Xv, 0, i, j)
    Yp, Yf = bold(sim.Y, 0, i, j), bold(sim.Y, i, i, j)
    b = stage2_rq(Xf, Xp, Yp, Yf)
    assert np.allclose(b.R11 @ b.Q1, Xf)
    assert np.allclose(b.R21 @ b.Q1 + b.R22 @ b.Q2, np.vstack([Xp, Yp]))
    assert np.allclose(b.R31 @ b.Q1 + b.R32 @ b.Q2 + b.R33 @ b.Q3, Yf)
    assert b.R22_1.shape == (i, i) and b.R22_2.shape == (i, i)
    with pytest.raises(RankDeficiencyError):
        stage2_rq(np.vstack([Xf, Xf[:1]]), Xp, Yp, Yf)


def test_innovations_operator_structure(scalar_run):
    m, sim, i, j = scalar_run
    ops = build_operators(m, i)
    Ef = bold(sim.E, i, i, j)
    noisy = ops.K_h @ Ef + 0.01 * np.random.default_rng(0).standard_normal(Ef.shape)
    est = recover_innovations_operator(noisy, 1, i, j)
    K = est.K_h
    assert np.allclose(np.diag(K), 1.0)
    assert np.allclose(K, np.tril(K))
    for d in range(i):
        assert np.allclose(np.diagonal(K, -d), K[d, 0])
    # Hankel structure of the recovered innovations
    H = to_batches(est.Ef_h, j)
    assert np.allclose(H[1:, :-1, :], H[:-1, 1:, :])
    with pytest.raises(InputError):
        recover_innovations_operator(noisy[:, :3], 1, i, 3)


def test_regress_dynamics_residual_is_orthogonal(rng):
    Xp_h, Xp_vh, Ep = (rng.standard_normal((k, 500)) for k in (1, 3, 3))
    Xf_h = rng.standard_normal((1, 500))
    dyn = regress_dynamics(Xf_h, Xp_h, Xp_vh, Ep)
    H = np.vstack([Xp_h, Xp_vh, Ep])
    assert np.allclose((Xf_h - dyn.J @ H) @ H.T, 0, atol=1e-9)
    assert dyn.Phi_vh.shape == (1, 3) and dyn.L_h.shape == (1, 3)


def test_assemble_states_prefers_past_and_covers_grid(rng):
    i, j, M, n = 3, 10, 2, 1
    truth = rng.standard_normal((2 * i + j - 1, M + 1, n))

    def bold_rows(r0, width):
        return truth[r0:r0 + width].transpose(2, 1, 0).reshape(n, -1)

    Xp, Xf = bold_rows(0, j), bold_rows(i, j)
    plus = np.concatenate([truth[2 * i:], np.zeros((1, M + 1, n))])
    Xplus = plus.transpose(2, 1, 0).reshape(n, -1)
    asm = assemble_states(Xp, Xf, Xplus, i, j, M)
    assert np.allclose(asm.values, truth)
    assert asm.overlap_discrepancy < 1e-12


def test_recover_parameters_from_true_states(scalar_run):
    m, sim, _, _ = scalar_run
    est = recover_parameters(sim.Xh, sim.Xv, sim.Y, sim.E).model
    assert np.allclose(est.A, m.A, atol=1e-10)
    assert np.allclose(est.K, m.K, atol=1e-10)
    with pytest.raises(RankDeficiencyError):
        recover_parameters(sim.Xh, GridData(sim.Xh.values * 2), sim.Y)


def test_vertical_sizes():
    assert vertical_sizes(20, 6) == (3, 16)
    assert vertical_sizes(8, 6) == (2, 6)
    iv, jv = vertical_sizes(4, 6)
    assert 2 * iv + jv - 2 == 4 and iv >= 1


def test_identify_end_to_end(scalar_run):
    m, sim, i, j = scalar_run
    res = identify(sim.Y, i, j, order_h=1, order_v=1)
    eh, ev = res.eigenvalues()
    assert abs(eh[0] - 0.5) < 0.1 and abs(ev[0] - 0.4) < 0.15
    assert res.Xh.values.shape == sim.Xh.values.shape
    assert res.initial_h.shape == (sim.Y.M + 1, 1)
    assert res.initial_v.shape == (sim.Y.N + 1, 1)
    d = res.to_dict()
    assert d["diagnostics"]["first_direction"] == "vertical"
    assert d["diagnostics"]["stable"]


def test_identify_rejects_bad_extents(scalar_run):
    _, sim, i, j = scalar_run
    with pytest.raises(GridSizeError):
        identify(sim.Y, i, j + 1)
    with pytest.raises(InputError):
        identify(sim.Y, i, j, 1, 1, iterations=0)
