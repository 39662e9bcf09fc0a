"""Closed-form and empirical bias of the horizontal orthogonal projection.

The bias is the contribution of the unknown vertical states,
``(1/jbar) Gamma_vh Xf_vh Xp_vh^T Gamma_vh^T (R_pp)^{-1} Y_p``. Its
cross-covariance factor has a closed form driven by the innovations-state
cross term ``P_hv``; when that vanishes, so does the bias.
"""
from dataclasses import dataclass

import numpy as np

from .hankel import bold
from .linalg import row_space_project
from .model import CovarianceSet, RoesserModel
from .operators import StructuredOperators, build_operators

ZERO_TOL = 1e-10


@dataclass
class DeltaForms:
    covariance_form: np.ndarray
    markov_form: np.ndarray

    @property
    def difference(self):
        return float(np.linalg.norm(self.covariance_form - self.markov_form))


def delta_markov(m: RoesserModel, covs: CovarianceSet, i, ops=None) -> DeltaForms:
    """Future-past cross-covariance row ``Delta`` in two forms.

    The covariance form is
    ``A1^i P_h Gamma_h^T + Phi_vh (I x P_v) Gamma_vh^T + L_h (I x Re) K_h^T``;
    the Markov form is ``[A1^{i-1} G1, ..., A1 G1, G1]``.
    """
    ops = ops or build_operators(m, i)
    cov = (ops.A1_i @ covs.P_h @ ops.Gamma_h.T
           + ops.Phi_vh @ np.kron(np.eye(i), covs.P_v) @ ops.Gamma_vh.T
           + ops.L_h @ np.kron(np.eye(i), covs.Re) @ ops.K_h.T)
    pw = [np.eye(m.n_h)]
    for _ in range(i - 1):
        pw.append(pw[-1] @ m.A1)
    mk = np.hstack([pw[a] @ covs.G1 for a in range(i - 1, -1, -1)])
    return DeltaForms(cov, mk)


@dataclass
class BiasTerms:
    Delta_i_h: np.ndarray
    P0: np.ndarray
    Q0: np.ndarray
    column_sum: np.ndarray
    inner: np.ndarray
    crosscov: np.ndarray
    P_hv: np.ndarray
    treated_as_zero: bool
    bias: np.ndarray = None


def p0_q0(ops: StructuredOperators, A3, P_hv):
    i = ops.i
    P0 = ops.Theta_vh @ ops.Phi_h @ np.kron(np.eye(i), P_hv)
    half = np.kron(np.eye(i), A3) @ ops.G_A1 @ np.kron(np.eye(i), P_hv)
    return P0, half + half.T


def column_terms(ops: StructuredOperators, P0, Q0, M):
    """Per-column expected products ``E[Xf_vh(k) Xp_vh(k)^T] / j`` for ``k = 0..M``.

    ``T_0 = 0``, ``T_1 = P0``, ``T_2 = P0 + A P0 A^T + Theta Phi Q0 A^T``
    (``A = A_vh``), and in general the terms whose sum over ``k`` is
    :func:`closed_form_sum`.
    """
    A = ops.A_vh
    TP = ops.Theta_vh @ ops.Phi_vh
    Ap = [np.eye(A.shape[0])]
    for _ in range(M + 1):
        Ap.append(Ap[-1] @ A)
    terms = [np.zeros_like(P0)]
    for k in range(1, M + 1):
        t = sum(Ap[d] @ P0 @ Ap[d].T for d in range(k))
        for l in range(1, k):
            for d in range(k - l):
                t = t + Ap[l - 1] @ TP @ Ap[d] @ Q0 @ Ap[l + d].T
        terms.append(t)
    return terms


def closed_form_sum(ops: StructuredOperators, P0, Q0, M):
    """Sum over ``k = 0..M`` of the per-column terms, as a weighted double sum."""
    A = ops.A_vh
    TP = ops.Theta_vh @ ops.Phi_vh
    Ap = [np.eye(A.shape[0])]
    for _ in range(M + 1):
        Ap.append(Ap[-1] @ A)
    out = np.zeros_like(P0)
    for k in range(M):
        out = out + (M - k) * (Ap[k] @ P0 @ Ap[k].T)
    for l in range(1, M):
        for k in range(M - l):
            out = out + (M - l - k) * (Ap[l - 1] @ TP @ Ap[k] @ Q0 @ Ap[l + k].T)
    return out


def bias_closed_form(m: RoesserModel, covs: CovarianceSet, i, M, ops=None,
                     zero_tol=ZERO_TOL) -> BiasTerms:
    """Closed-form cross-covariance ``(1/jbar) Gamma_vh Xf_vh Xp_vh^T Gamma_vh^T``.

    ``P_hv`` below ``zero_tol`` (relative to ``P_h`` and ``P_v``) is treated
    as exactly zero, so the result is then the zero matrix.

    Returns
    -------
    BiasTerms
        ``column_sum`` is the unnormalised sum over columns; ``inner`` is it
        divided by ``M + 1``; ``crosscov`` is ``Gamma_vh inner Gamma_vh^T``.
    """
    ops = ops or build_operators(m, i, M)
    P_hv = np.array(covs.P_hv, dtype=float)
    scale = max(1.0, np.linalg.norm(covs.P_h) + np.linalg.norm(covs.P_v))
    zero = bool(np.linalg.norm(P_hv) <= zero_tol * scale)
    if zero:
        P_hv = np.zeros_like(P_hv)
    P0, Q0 = p0_q0(ops, m.A3, P_hv)
    total = closed_form_sum(ops, P0, Q0, M)
    inner = total / (M + 1)
    cross = ops.Gamma_vh @ inner @ ops.Gamma_vh.T
    delta = delta_markov(m, covs, i, ops).covariance_form
    return BiasTerms(delta, P0, Q0, total, inner, cross, P_hv, zero)


@dataclass
class EmpiricalBias:
    inner: np.ndarray
    crosscov: np.ndarray
    bias: np.ndarray

    @property
    def crosscov_norm(self):
        return float(np.linalg.norm(self.crosscov))

    @property
    def bias_norm(self):
        return float(np.linalg.norm(self.bias))


def bias_empirical(sim, ops: StructuredOperators, i, j, M=None) -> EmpiricalBias:
    """Direct evaluation of the bias from simulated (true) vertical states."""
    M = sim.Y.M if M is None else M
    Xf = bold(sim.Xv, i, i, j, M)
    Xp = bold(sim.Xv, 0, i, j, M)
    Yp = bold(sim.Y, 0, i, j, M)
    jbar = j * (M + 1)
    inner = Xf @ Xp.T / jbar
    cross = ops.Gamma_vh @ inner @ ops.Gamma_vh.T
    Rpp = Yp @ Yp.T / jbar
    bias = cross @ np.linalg.solve(Rpp, Yp)
    return EmpiricalBias(inner, cross, bias)


def projection_gap(sim, m: RoesserModel, covs: CovarianceSet, i, j, M=None, ops=None):
    """Relative distance between ``Yf/Yp`` and ``Gamma_h Delta R_pp^{-1} Y_p``."""
    M = sim.Y.M if M is None else M
    ops = ops or build_operators(m, i)
    Yp = bold(sim.Y, 0, i, j, M)
    Yf = bold(sim.Y, i, i, j, M)
    jbar = j * (M + 1)
    O = row_space_project(Yf, Yp)
    delta = delta_markov(m, covs, i, ops).covariance_form
    pred = ops.Gamma_h @ delta @ np.linalg.solve(Yp @ Yp.T / jbar, Yp)
    return float(np.linalg.norm(O - pred) / np.linalg.norm(O))
