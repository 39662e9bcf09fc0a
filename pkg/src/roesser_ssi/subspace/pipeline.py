"""End-to-end identification of an innovations Roesser model from one output grid."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericalError, RankDeficiencyError
from ..grid import GridData
from ..hankel import bold, check_extents
from ..model import RoesserModel, spectral_radius
from .stage1 import oriented, stage1_project, stage1_states
from .stage2 import (assemble_states, oblique_gamma, propagation_operator, recover_future_vertical,
                     recover_gamma_vh, recover_innovations_operator, recover_past,
                     regress_dynamics, stage2_rq)


def vertical_sizes(M, i):
    """Default vertical depth and width for ``M + 1`` grid columns.

    ``i_v = min(i, (M + 2) // 6)`` (at least 2, so stage 2 has more output
    rows than states for a scalar output) and ``j_v = M - 2 i_v + 2``, which
    keeps ``j_v >= 4 i_v`` once ``M >= 16``.
    """
    i_v = max(2, min(i, (M + 2) // 6))
    j_v = M - 2 * i_v + 2
    if j_v < i_v:
        raise InputError(f"M={M} is too small for a vertical pass")
    return i_v, j_v


@dataclass
class DirectionResult:
    """Stage-2 output for one direction, in that direction's orientation."""
    states: np.ndarray
    Gamma: np.ndarray
    Gamma_vh: np.ndarray
    K_h: np.ndarray
    J: np.ndarray
    overlap_discrepancy: float
    gap_filled: bool
    oblique_singular_values: np.ndarray
    cross_states: np.ndarray = None


def stage2_direction(G: GridData, cross: GridData, n, i, j, initial_state="zero",
                     regularize=True) -> DirectionResult:
    """Run stage 2 on an oriented grid.

    Parameters
    ----------
    G : GridData
        Outputs, own direction along axis 0, ``N = 2i + j - 2``.
    cross : GridData
        Estimates of the other direction's states on the same grid.
    n : int
        Own state dimension.
    initial_state : {"zero", None}
        Boundary assumption for the own state at ``r = 0``.
    """
    ny, nv = G.n, cross.n
    M = G.M
    check_extents(G.N, i, j)
    if ny * i <= n:
        raise InputError(f"stage 2 needs n_y*i > n, got n_y={ny}, i={i}, n={n}; "
                         "increase the Hankel depth")
    Yp, Yf = bold(G, 0, i, j), bold(G, i, i, j)
    Xp_vh, Xf_vh = bold(cross, 0, i, j), bold(cross, i, i, j)
    blocks = stage2_rq(Xf_vh, Xp_vh, Yp, Yf)
    Gamma_vh = recover_gamma_vh(blocks, ny, nv, i)
    Gamma, _, sv = oblique_gamma(blocks, n)
    Ef = blocks.R33 @ blocks.Q3
    inn = recover_innovations_operator(Ef, ny, i, j)
    K_h = inn.K_h

    G_pinv = np.linalg.pinv(Gamma)
    # future cross states consistent with Gamma_vh
    Xf_h0 = G_pinv @ (Yf - Ef - Gamma_vh @ Xf_vh)
    Zf = Yf - Gamma @ Xf_h0 - K_h @ inn.Ef_h
    Xf_vh2 = recover_future_vertical(Zf, Gamma_vh, nv, i, j, regularize=regularize)
    Xf_h = G_pinv @ (Yf - Gamma_vh @ Xf_vh2 - K_h @ inn.Ef_h)

    # past: Zp = R22_2 R22_1^{-1} Xp_vh
    Rp = np.linalg.lstsq(blocks.R22_1.T, blocks.R22_2.T, rcond=None)[0].T
    Zp = Rp @ Xp_vh
    x0 = np.zeros((n, M + 1)) if initial_state == "zero" else None
    past = recover_past(Yp, Zp, Gamma, Gamma_vh, K_h, nv, ny, i, j, initial_state=x0,
                        regularize=regularize)
    dyn = regress_dynamics(Xf_h, past.Xp_h, past.Xp_vh, past.Ep_h)
    T1 = propagation_operator(dyn, Gamma, Gamma_vh, K_h)
    Xf_plus = T1 @ np.vstack([Xf_vh2, inn.Ef_h, Yf])
    asm = assemble_states(past.Xp_h, Xf_h, Xf_plus, i, j, M)
    cross_grid = np.empty((G.N + 1, M + 1, nv))
    cross_grid[i:] = _hankel_rows(Xf_vh2, nv, i, j, M)
    cross_grid[:i + j - 1] = _hankel_rows(past.Xp_vh, nv, i, j, M)
    return DirectionResult(asm.values, Gamma, Gamma_vh, K_h, dyn.J, asm.overlap_discrepancy,
                           asm.gap_filled, sv, cross_grid)


def _hankel_rows(X, n, i, j, M):
    """Generators of a bold block-Hankel matrix as grid rows ``(i+j-1, M+1, n)``."""
    B = X.reshape(i, n, M + 1, j)
    rows = np.concatenate([B[0].transpose(2, 1, 0), B[1:, :, :, -1].transpose(0, 2, 1)])
    return rows


@dataclass
class ParameterEstimate:
    model: RoesserModel
    residuals: np.ndarray
    fit_residual: float


def _lstsq(X, Y):
    """``B`` minimising ``||Y - B X||`` for row-sample matrices ``X``, ``Y``."""
    return np.linalg.lstsq(X.T, Y.T, rcond=None)[0].T


def recover_parameters(Xh: GridData, Xv: GridData, Y: GridData,
                       innovations: GridData = None) -> ParameterEstimate:
    """Regress outputs and shifted states on the state grids.

    ``y = C [xh; xv] + e`` gives ``C`` and the innovations (or ``C`` alone
    when the innovations are supplied); then
    ``xh[r+1, s]`` and ``xv[r, s+1]`` regressed on ``[xh; xv; e]`` give
    ``[A1 A2 K1]`` and ``[A3 A4 K2]``. ``Re`` is the sample covariance of
    the innovations and ``Q = K Re K^T``, ``S = K Re``, ``R = Re``.
    """
    nh, nv, ny = Xh.n, Xv.n, Y.n
    if Xh.values.shape[:2] != Y.values.shape[:2] or Xv.values.shape[:2] != Y.values.shape[:2]:
        raise InputError("state and output grids must share extents")
    xh, xv, y = Xh.values, Xv.values, Y.values
    X = np.concatenate([xh, xv], axis=2)
    Xf = X.reshape(-1, nh + nv)
    rank = np.linalg.matrix_rank(Xf)
    if rank < nh + nv:
        raise RankDeficiencyError("state regressors are collinear", rank=int(rank), size=nh + nv)
    if innovations is None:
        C = _lstsq(X.reshape(-1, nh + nv).T, y.reshape(-1, ny).T)
        e = y - X @ C.T
    else:
        e = innovations.values
        C = _lstsq(X.reshape(-1, nh + nv).T, (y - e).reshape(-1, ny).T)
    E = e.reshape(-1, ny)
    Re = E.T @ E / E.shape[0]
    Z = np.concatenate([X, e], axis=2)
    nz = Z.shape[2]
    B1 = _lstsq(Z[:-1].reshape(-1, nz).T, xh[1:].reshape(-1, nh).T)
    B2 = _lstsq(Z[:, :-1].reshape(-1, nz).T, xv[:, 1:].reshape(-1, nv).T)
    r1 = xh[1:] - Z[:-1] @ B1.T
    r2 = xv[:, 1:] - Z[:, :-1] @ B2.T
    num = np.linalg.norm(r1) ** 2 + np.linalg.norm(r2) ** 2
    den = np.linalg.norm(xh[1:]) ** 2 + np.linalg.norm(xv[:, 1:]) ** 2
    fit = float(np.sqrt(num / den)) if den > 0 else 0.0
    A1, A2, K1 = B1[:, :nh], B1[:, nh:nh + nv], B1[:, nh + nv:]
    A3, A4, K2 = B2[:, :nh], B2[:, nh:nh + nv], B2[:, nh + nv:]
    Kall = np.vstack([K1, K2])
    Re = (Re + Re.T) / 2
    m = RoesserModel(nh, nv, ny, A1, A2, A3, A4, C[:, :nh], C[:, nh:], K1=K1, K2=K2, Re=Re,
                     Q=Kall @ Re @ Kall.T, R=Re.copy(), S=Kall @ Re)
    return ParameterEstimate(m, e, fit)


@dataclass
class IdentificationResult:
    """Recovered model, state grids and diagnostics.

    ``Pi`` is the sample covariance of the stacked states and
    ``G = A Pi C^T + S``; ``initial_h`` is the grid row ``r = 0`` of the
    horizontal states and ``initial_v`` the column ``s = 0`` of the
    vertical ones.
    """
    model: RoesserModel
    Xh: GridData
    Xv: GridData
    Pi: np.ndarray
    G: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_h(self):
        return self.model.n_h

    @property
    def n_v(self):
        return self.model.n_v

    @property
    def initial_h(self):
        return self.Xh.values[0]

    @property
    def initial_v(self):
        return self.Xv.values[:, 0]

    def eigenvalues(self):
        """Eigenvalue multisets of the recovered ``A1`` and ``A4``."""
        return np.linalg.eigvals(self.model.A1), np.linalg.eigvals(self.model.A4)

    def to_dict(self):
        m = self.model
        return {"model": m.to_dict(), "Pi": self.Pi.tolist(), "G": self.G.tolist(),
                "eigenvalues_A1": _complex_list(np.linalg.eigvals(m.A1)),
                "eigenvalues_A4": _complex_list(np.linalg.eigvals(m.A4)),
                "initial_h": self.initial_h.tolist(), "initial_v": self.initial_v.tolist(),
                "diagnostics": self.diagnostics}


def _complex_list(z):
    z = np.sort_complex(np.asarray(z, dtype=complex))
    return [[float(v.real), float(v.imag)] for v in z]


def state_statistics(Xh: GridData, Xv: GridData, m: RoesserModel):
    """Sample state covariance ``Pi`` and ``G = A Pi C^T + S``."""
    X = np.concatenate([Xh.values, Xv.values], axis=2).reshape(-1, m.n_x)
    Pi = X.T @ X / X.shape[0]
    S = m.S if m.S is not None else np.zeros((m.n_x, m.n_y))
    return Pi, m.A @ Pi @ m.C.T + S


def identify(Y: GridData, i, j, order_h=None, order_v=None, i_v=None, j_v=None,
             iterations=1, initial_state="zero", regularize=True) -> IdentificationResult:
    """Identify an innovations Roesser model from an output grid.

    Parameters
    ----------
    Y : GridData
        Outputs with ``N = 2i + j - 2``.
    i, j : int
        Horizontal Hankel depth and width.
    order_h, order_v : int, optional
        State dimensions; picked from singular-value gaps when omitted.
    i_v, j_v : int, optional
        Vertical depth and width with ``M = 2 i_v + j_v - 2``; defaults from
        :func:`vertical_sizes`.
    iterations : int
        Number of stage-2 sweeps. A sweep runs the shorter direction first,
        with the other direction's latest states as cross input, then the
        longer direction with the fresh estimates.
    initial_state : {"zero", None}
        Boundary assumption for the states at ``r = 0`` and ``s = 0``.

    Returns
    -------
    IdentificationResult
    """
    if not isinstance(Y, GridData):
        Y = GridData(Y)
    if iterations < 1:
        raise InputError("iterations must be at least 1")
    if initial_state not in ("zero", None):
        raise InputError("initial_state must be 'zero' or None")
    check_extents(Y.N, i, j)
    if i_v is None or j_v is None:
        dv = vertical_sizes(Y.M, i)
        i_v = dv[0] if i_v is None else i_v
        j_v = Y.M - 2 * i_v + 2 if j_v is None else j_v
    check_extents(Y.M, i_v, j_v)

    ph = stage1_project(Y, i, j, "horizontal", order=order_h, keep_projection=False)
    pv = stage1_project(Y, i_v, j_v, "vertical", order=order_v, keep_projection=False)
    if ph.n == 0 or pv.n == 0:
        raise NumericalError("stage 1 found no dynamics in one direction (order 0)")
    Xh = stage1_states(Y, ph)
    Xv = stage1_states(Y, pv)

    # The short direction goes first: its cross input is then the stage-1
    # estimate from the long direction, which averages over many more columns.
    vertical_first = Y.M <= Y.N
    sweeps = []
    for _ in range(iterations):
        if vertical_first:
            rv = stage2_direction(Y.transpose(), Xh.transpose(), pv.n, i_v, j_v,
                                  initial_state, regularize)
            Xv = GridData(rv.states).transpose()
            rh = stage2_direction(Y, Xv, ph.n, i, j, initial_state, regularize)
            Xh = GridData(rh.states)
        else:
            rh = stage2_direction(Y, Xv, ph.n, i, j, initial_state, regularize)
            Xh = GridData(rh.states)
            rv = stage2_direction(Y.transpose(), Xh.transpose(), pv.n, i_v, j_v,
                                  initial_state, regularize)
            Xv = GridData(rv.states).transpose()
        sweeps.append({"overlap_discrepancy_h": rh.overlap_discrepancy,
                       "overlap_discrepancy_v": rv.overlap_discrepancy,
                       "gap_filled_h": rh.gap_filled, "gap_filled_v": rv.gap_filled})
    est = recover_parameters(Xh, Xv, Y)
    diag = {
        "order_h": ph.n, "order_v": pv.n,
        "i": i, "j": j, "i_v": i_v, "j_v": j_v,
        "singular_values_h": ph.singular_values.tolist(),
        "singular_values_v": pv.singular_values.tolist(),
        "oblique_singular_values_h": rh.oblique_singular_values.tolist(),
        "oblique_singular_values_v": rv.oblique_singular_values.tolist(),
        "sweeps": sweeps,
        "first_direction": "vertical" if vertical_first else "horizontal",
        "state_regression_residual": est.fit_residual,
        "spectral_radius": float(spectral_radius(est.model.A)),
        "stable": bool(spectral_radius(est.model.A) < 1),
    }
    Pi, G = state_statistics(Xh, Xv, est.model)
    return IdentificationResult(est.model, Xh, Xv, Pi, G, diag)
