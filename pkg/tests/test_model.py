import numpy as np
import pytest
import scipy.linalg as sla

from helpers import planted_scalar, random_innovations_model, scalar_model, uncorrelated_scalar
from roesser_ssi.errors import InputError
from roesser_ssi.grid import GridData
from roesser_ssi.hankel import empirical_autocovariance
from roesser_ssi.model import (MarkovPowers, RoesserModel, autocovariance, construct_uncorrelated,
                               innovation_covariances, innovation_state_covariance,
                               lyapunov_residual, markov_power, propagate, simulate,
                               solve_lyapunov, solve_riccati, validate_model, with_kalman_gain)


def test_grid_data_validation_and_transpose():
    G = GridData(np.arange(12.0).reshape(3, 4))
    assert (G.N, G.M, G.n) == (2, 3, 1)
    assert G.transpose().values.shape == (4, 3, 1)
    assert G.transpose().values[1, 2, 0] == G.values[2, 1, 0]
    with pytest.raises(InputError):
        GridData(np.array([[np.nan]]))
    with pytest.raises(InputError):
        GridData(np.zeros(3))


def test_model_shape_checks():
    with pytest.raises(InputError):
        RoesserModel(1, 1, 1, [[0.5]], [[0.1, 0.2]], [[0.3]], [[0.4]], [[1.0]], [[1.0]])
    with pytest.raises(InputError):
        RoesserModel(1, 1, 0, [[0.5]], [[0.1]], [[0.3]], [[0.4]], np.zeros((0, 1)),
                     np.zeros((0, 1)))


def test_model_dict_round_trip(rng):
    m = random_innovations_model(rng, 2, 1, 2)
    back = RoesserModel.from_dict(m.to_dict())
    for name in ("A1", "A2", "A3", "A4", "C1", "C2", "K1", "K2", "Re"):
        assert np.array_equal(getattr(back, name), getattr(m, name))
    with pytest.raises(InputError):
        RoesserModel.from_dict({"n_h": 1, "n_v": 1, "n_y": 1, "bogus": 1})


def test_validate_flags_unstable_model():
    m = scalar_model(A1=1.2)
    rep = validate_model(m)
    assert not rep.flags["stable"] and not rep.passed
    assert validate_model(uncorrelated_scalar()).passed


def test_lyapunov_solution(rng):
    m = random_innovations_model(rng, 2, 2, 1)
    Pi_h, Pi_v = solve_lyapunov(m)
    assert lyapunov_residual(m, Pi_h, Pi_v) < 1e-12
    assert np.all(np.linalg.eigvalsh(Pi_h) > 0)


def test_decoupled_scalar_error_covariance_identity():
    m = RoesserModel(1, 1, 1, [[0.6]], [[0.0]], [[0.0]], [[0.3]], [[1.0]], [[0.5]],
                     Q=np.diag([1.0, 0.5]), R=[[0.8]], S=np.zeros((2, 1)))
    cs = solve_riccati(m)
    Pi = sla.block_diag(cs.Pi_h, cs.Pi_v)
    assert np.allclose(cs.Sigma, Pi - cs.P, atol=1e-8)
    assert np.allclose(cs.K, cs.K_error_form, atol=1e-8)


def test_kalman_gain_round_trip_for_innovations_model():
    m = uncorrelated_scalar()
    m2 = with_kalman_gain(m.replace(Q=None, R=None, S=None))
    assert np.allclose(m2.K, m.K, atol=1e-8)
    assert np.allclose(m2.Re, m.Re, atol=1e-8)


def test_construct_uncorrelated_cancels_cross_term():
    m = uncorrelated_scalar()
    assert abs(innovation_state_covariance(m)[2][0, 0]) < 1e-10
    assert abs(m.K2[0, 0] + 0.218) < 0.01
    assert np.linalg.norm(innovation_covariances(planted_scalar()).P_hv) > 0.05
    with pytest.raises(InputError):
        construct_uncorrelated(scalar_model(A1=1.5))


def test_markov_powers():
    m = uncorrelated_scalar()
    mp = MarkovPowers(m)
    assert np.array_equal(mp(0, 0), np.eye(2))
    assert np.allclose(mp(1, 1), mp.A10 @ mp.A01 + mp.A01 @ mp.A10)
    assert np.array_equal(markov_power(m, 2, 1), mp(2, 1))
    with pytest.raises(InputError):
        markov_power(m, -1, 0)


def test_propagate_satisfies_recurrences(rng):
    m = random_innovations_model(rng, 2, 1, 1)
    E = rng.standard_normal((6, 5, 1))
    Y, Xh, Xv = propagate(m, E)
    r, s = 2, 3
    assert np.allclose(Xh[r + 1, s], m.A1 @ Xh[r, s] + m.A2 @ Xv[r, s] + m.K1 @ E[r, s])
    assert np.allclose(Xv[r, s + 1], m.A3 @ Xh[r, s] + m.A4 @ Xv[r, s] + m.K2 @ E[r, s])
    assert np.allclose(Y[r, s], m.C1 @ Xh[r, s] + m.C2 @ Xv[r, s] + E[r, s])
    assert not np.any(Xh[0]) and not np.any(Xv[:, 0])


def test_simulate_is_seeded():
    m = uncorrelated_scalar()
    a, b, c = simulate(m, 20, 5, 1), simulate(m, 20, 5, 1), simulate(m, 20, 5, 2)
    assert np.array_equal(a.Y.values, b.Y.values)
    assert not np.array_equal(a.Y.values, c.Y.values)
    assert simulate(m, 20, 5, 1, burn_in=10).Y.values.shape == (21, 6, 1)
    assert np.any(simulate(m, 20, 5, 1, initial_h="stationary").Xh.values[0])
    with pytest.raises(InputError):
        simulate(m, 20, 5, 1, initial_h="random")


def test_empirical_autocovariance_matches_theory():
    m = uncorrelated_scalar()
    covs = innovation_covariances(m)
    sim = simulate(m, 300, 300, 11, burn_in=30)
    est = empirical_autocovariance(sim.Y, 0, 0)
    assert abs(est[0, 0] / covs.Lambda00[0, 0] - 1) < 0.05
    for k, l in ((1, 0), (0, 1), (1, 1)):
        th = autocovariance(m, covs, k, l)[0, 0]
        assert abs(empirical_autocovariance(sim.Y, k, l)[0, 0] - th) < 0.05 * covs.Lambda00[0, 0]
