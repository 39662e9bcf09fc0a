"""Stage-by-stage checks with exact inputs built from a known model and its simulation."""
import numpy as np

from ..hankel import bold
from ..linalg import row_space_project
from ..model import RoesserModel
from ..operators import build_operators
from .pipeline import recover_parameters
from .stage2 import (DynamicsEstimate, assemble_states, propagation_operator,
                     recover_future_vertical, recover_gamma_vh, recover_innovations_operator,
                     recover_past, regress_dynamics, stage2_rq)


def _rel(est, true):
    den = np.linalg.norm(true)
    return float(np.linalg.norm(est - true) / den) if den > 0 else float(np.linalg.norm(est))


def _crop(X, n, j, width):
    """Keep the first ``width`` columns of each ``j``-wide block."""
    return X.reshape(X.shape[0], -1, j)[:, :, :width].reshape(X.shape[0], -1)


def oracle_residuals(m: RoesserModel, sim, i, j):
    """Relative error of every stage-2 step when fed exact inputs.

    Parameters
    ----------
    m : RoesserModel
        Innovations model that generated ``sim`` with a zero boundary.
    sim : Simulation
        Grid with ``N = 2i + j - 2``.

    Returns
    -------
    dict
        Stage name to relative residual.
    """
    M = sim.Y.M
    ops = build_operators(m, i)
    nh, nv, ny = m.n_h, m.n_v, m.n_y
    Yp, Yf = bold(sim.Y, 0, i, j), bold(sim.Y, i, i, j)
    Xp_vh, Xf_vh = bold(sim.Xv, 0, i, j), bold(sim.Xv, i, i, j)
    Xp_h, Xf_h = bold(sim.Xh, 0, 1, j), bold(sim.Xh, i, 1, j)
    Ep, Ef = bold(sim.E, 0, i, j), bold(sim.E, i, i, j)
    out = {}

    # Gamma_vh from R-blocks of data whose innovations part is orthogonal to the regressors
    Wp = np.vstack([Xp_vh, Yp])
    reg = np.vstack([Xf_vh, Wp])
    noise = ops.K_h @ Ef
    noise = noise - row_space_project(noise, reg)
    Yf_exact = ops.Gamma_vh @ Xf_vh + ops.Gamma_h @ row_space_project(Xf_h, Wp) + noise
    blocks = stage2_rq(Xf_vh, Xp_vh, Yp, Yf_exact)
    out["gamma_vh"] = _rel(recover_gamma_vh(blocks, ny, nv, i), ops.Gamma_vh)

    inn = recover_innovations_operator(ops.K_h @ Ef, ny, i, j)
    out["innovations_operator"] = _rel(inn.K_h, ops.K_h)
    out["future_innovations"] = _rel(inn.Ef_h, Ef)

    out["future_vertical"] = _rel(
        recover_future_vertical(ops.Gamma_vh @ Xf_vh, ops.Gamma_vh, nv, i, j, regularize=False),
        Xf_vh)

    past = recover_past(Yp, ops.Gamma_vh @ Xp_vh, ops.Gamma_h, ops.Gamma_vh, ops.K_h, nv, ny,
                        i, j, initial_state=np.zeros((nh, M + 1)), regularize=False)
    out["past_vertical"] = _rel(past.Xp_vh, Xp_vh)
    out["past_innovations"] = _rel(past.Ep_h, Ep)
    out["past_horizontal"] = _rel(past.Xp_h, Xp_h)

    dyn = regress_dynamics(Xf_h, Xp_h, Xp_vh, Ep)
    out["dynamics"] = _rel(dyn.J, np.hstack([ops.A1_i, ops.Phi_vh, ops.L_h]))

    exact = DynamicsEstimate(None, ops.A1_i, ops.Phi_vh, ops.L_h)
    T1 = propagation_operator(exact, ops.Gamma_h, ops.Gamma_vh, ops.K_h)
    Xf_plus = T1 @ np.vstack([Xf_vh, Ef, Yf])
    true_plus = bold(sim.Xh, 2 * i, 1, j - 1)
    out["propagation"] = _rel(_crop(Xf_plus, nh, j, j - 1), true_plus)

    asm = assemble_states(Xp_h, Xf_h, Xf_plus, i, j, M)
    out["assembly"] = _rel(asm.values, sim.Xh.values)

    est = recover_parameters(sim.Xh, sim.Xv, sim.Y, sim.E).model
    Esamp = sim.E.values.reshape(-1, ny)
    out["parameters"] = max(_rel(est.A, m.A), _rel(est.C, m.C), _rel(est.K, m.K),
                            _rel(est.Re, Esamp.T @ Esamp / Esamp.shape[0]))
    return out
