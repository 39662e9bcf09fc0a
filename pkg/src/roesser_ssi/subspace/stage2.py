"""Stage 2: state sequences with the cross-direction states accounted for.

All routines work in the orientation of the direction being processed: the
"own" states run along axis 0 of the grid and the "other" (cross) states
enter through ``Gamma_vh``. Bold matrices stack the ``M + 1`` Hankel blocks
side by side, ``j`` columns each.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import IllConditionedError, InputError, NumericalError, RankDeficiencyError
from ..linalg import hss_identity, lttss, orth_complement, pseudo_inverse, rq_decompose


def to_batches(mat, j):
    """``(rows, K*j)`` bold matrix to ``(rows, j, K)``."""
    rows = mat.shape[0]
    return mat.reshape(rows, -1, j).transpose(0, 2, 1)


def from_generators(gens, i):
    """``(i+j-1, n, K)`` Hankel generators to the ``(n*i, K*j)`` bold matrix."""
    L, n, K = gens.shape
    j = L - i + 1
    win = sliding_window_view(gens, i, axis=0)  # (j, n, K, i): [c, p, k, a]
    return np.ascontiguousarray(win.transpose(3, 1, 2, 0).reshape(i * n, K * j))


def _solve_right(X, R):
    """``X @ inv(R)`` for square ``R``."""
    try:
        return np.linalg.solve(R.T, X.T).T
    except np.linalg.LinAlgError:
        return X @ pseudo_inverse(R)


@dataclass
class RQBlocks:
    """Block factors of ``[Xf_vh; Xp_vh; Yp; Yf] = L Q``.

    Row groups are ``1``: ``Xf_vh``, ``2``: ``[Xp_vh; Yp]``, ``3``: ``Yf``;
    ``R22`` is further split at the ``Xp_vh`` / ``Yp`` boundary into
    ``R22_1`` (upper left), ``R22_2`` (lower left) and ``R22_3``.
    """
    R11: np.ndarray
    R21: np.ndarray
    R22: np.ndarray
    R31: np.ndarray
    R32: np.ndarray
    R33: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    n_cross: int

    @property
    def R22_1(self):
        return self.R22[:self.n_cross, :self.n_cross]

    @property
    def R22_2(self):
        return self.R22[self.n_cross:, :self.n_cross]

    @property
    def R22_3(self):
        return self.R22[self.n_cross:, self.n_cross:]


def stage2_rq(Xf_vh, Xp_vh, Yp, Yf) -> RQBlocks:
    """RQ factorisation of the stacked data and cross-state matrices.

    Raises
    ------
    RankDeficiencyError
        ``R11`` or ``R22`` is singular, so later inverses are undefined.
    """
    a, b, c = Xf_vh.shape[0], Xp_vh.shape[0], Yp.shape[0]
    L, Q, _ = rq_decompose(np.vstack([Xf_vh, Xp_vh, Yp, Yf]))
    w = a + b + c
    d = np.abs(np.diag(L))
    top = d.max() if d.size else 0.0
    for name, seg in (("R11", d[:a]), ("R22", d[a:w])):
        bad = int(np.sum(seg <= 1e-10 * top)) if top > 0 else seg.size
        if bad:
            raise RankDeficiencyError(f"stage-2 RQ: {name} is rank deficient",
                                      rank=seg.size - bad, size=seg.size)
    return RQBlocks(L[:a, :a], L[a:w, :a], L[a:w, a:w], L[w:, :a], L[w:, a:w], L[w:, w:],
                    Q[:a], Q[a:w], Q[w:], b)


def recover_gamma_vh(blocks: RQBlocks, n_y, n_v, i):
    """Lower-block-Toeplitz ``Gamma_vh`` from ``Gamma_vh R11 = R31 - R32 R22^{-1} R21``."""
    rhs = blocks.R31 - _solve_right(blocks.R32, blocks.R22) @ blocks.R21
    return lttss(np.eye(n_y * i), blocks.R11, rhs, n_y, n_v, i)


def oblique_gamma(blocks: RQBlocks, n):
    """Observability matrix and states from the oblique projection ``R32 R22^{-1} Wp``.

    Returns
    -------
    Gamma : (n_y i, n) ndarray
    Xf : (n, jbar) ndarray
    singular_values : ndarray
    """
    Lw = _solve_right(blocks.R32, blocks.R22)
    Z = np.hstack([Lw @ blocks.R21, blocks.R32])
    U, s, Wt = np.linalg.svd(Z, full_matrices=False)
    sq = np.sqrt(s[:n])
    Gamma = U[:, :n] * sq
    Xf = (sq[:, None] * Wt[:n]) @ np.vstack([blocks.Q1, blocks.Q2])
    return Gamma, Xf, s


@dataclass
class InnovationsEstimate:
    K_h: np.ndarray
    Ef_h: np.ndarray
    e0: np.ndarray
    V: np.ndarray


def recover_innovations_operator(Ef, n_y, i, j, solve_hankel=True) -> InnovationsEstimate:
    """Innovations Toeplitz operator ``K_h`` and the Hankel innovations ``Ef_h``.

    Parameters
    ----------
    Ef : (n_y i, K j) ndarray
        Residual ``K_h Ef_h`` of the future outputs. Its first block row
        holds the innovations ``e0`` at the ``j`` future positions.

    Notes
    -----
    With ``Ef1`` the first ``j - i + 1`` columns of each block and ``Ef2``
    the depth-``i`` Hankel of ``e0``, ``Ef1 = K_h Ef2``; ``K_h`` solves the
    sample-moment version of this structured equation and is then scaled
    to an identity leading block. ``Ef_h`` keeps ``e0`` for its first ``j``
    generators and fits the last ``i - 1`` from ``K_h Ef_h = Ef``.
    """
    if j < i:
        raise InputError(f"need j >= i to estimate the innovations operator (i={i}, j={j})")
    B = to_batches(Ef, j)  # (n_y i, j, K)
    K = B.shape[2]
    e0 = B[:n_y]  # (n_y, j, K)
    w = j - i + 1
    gens = e0.transpose(1, 0, 2)  # (j, n_y, K)
    Ef2 = from_generators(gens, i)  # depth i, width w, per batch
    Ef1 = to_batches(Ef, j)[:, :w, :].transpose(0, 2, 1).reshape(n_y * i, K * w)
    scale = w * K
    V1 = Ef1 @ Ef2.T / scale
    V2 = Ef2 @ Ef2.T / scale
    V = lttss(np.eye(n_y * i), V2, V1, n_y, n_y, i)
    K0 = V[:n_y, :n_y]
    cond = np.linalg.cond(K0)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedError("innovations operator: leading block K0 is singular", cond)
    K_h = V @ np.kron(np.eye(i), np.linalg.inv(K0))
    Ef_h = None
    if solve_hankel:
        g = hss_identity(K_h, B, n_y, i, j, fixed_leading=gens, regularize=True)
        Ef_h = from_generators(g, i)
    return InnovationsEstimate(K_h, Ef_h, gens, V)


def hankel_fit(A, Z, block_rows, i, j, **kwargs):
    """Bold matrix of per-column block-Hankel solutions of ``A X_k = Z_k``."""
    g = hss_identity(A, to_batches(Z, j), block_rows, i, j, **kwargs)
    return from_generators(g, i), g


def recover_future_vertical(Zf, Gamma_vh, n_v, i, j, regularize=True):
    """Block-Hankel cross states ``Xf_vh`` from ``Zf = Gamma_vh Xf_vh``."""
    return hankel_fit(Gamma_vh, Zf, n_v, i, j, regularize=regularize)[0]


@dataclass
class PastEstimate:
    Xp_vh: np.ndarray
    Ep_h: np.ndarray
    Xp_h: np.ndarray


def recover_past(Yp, Zp, Gamma_h, Gamma_vh, K_h, n_v, n_y, i, j, initial_state=None,
                 regularize=True) -> PastEstimate:
    """Past cross states, innovations and own states.

    Parameters
    ----------
    Zp : ndarray
        ``Gamma_vh Xp_vh`` (up to noise).
    initial_state : (n, K) ndarray or None
        Own state at the first past position of each column (zero for a
        zero boundary). It pins the directions of the innovations that the
        data cannot separate from the initial state; without it a small
        ridge picks the minimum-norm solution.
    """
    Xp_vh = hankel_fit(Gamma_vh, Zp, n_v, i, j, regularize=regularize)[0]
    G_pinv = pseudo_inverse(Gamma_h)
    resid = Yp - Gamma_vh @ Xp_vh
    n = Gamma_h.shape[1]
    if n == 0:
        perp = np.eye(Yp.shape[0])
    else:
        perp = orth_complement(Gamma_h)
    penalty = None
    if initial_state is not None and n > 0:
        d = G_pinv @ resid[:, ::j] - np.asarray(initial_state, dtype=float)
        penalty = (G_pinv @ K_h, d)
    Ep_h = hankel_fit(perp @ K_h, perp @ resid, n_y, i, j, lead_penalty=penalty,
                      regularize=regularize)[0]
    Xp_h = G_pinv @ (resid - K_h @ Ep_h)
    return PastEstimate(Xp_vh, Ep_h, Xp_h)


@dataclass
class DynamicsEstimate:
    J: np.ndarray
    A1_i: np.ndarray
    Phi_vh: np.ndarray
    L_h: np.ndarray


def regress_dynamics(Xf_h, Xp_h, Xp_vh, Ep_h) -> DynamicsEstimate:
    """Least-squares ``Xf_h = [A1^i, Phi_vh, L_h] [Xp_h; Xp_vh; Ep_h]``."""
    H = np.vstack([Xp_h, Xp_vh, Ep_h])
    jbar = H.shape[1]
    Z1 = H @ H.T / jbar
    Z2 = Xf_h @ H.T / jbar
    cond = np.linalg.cond(Z1)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedError(f"dynamics regression: Z1 singular (cond {cond:.3e})", cond)
    J = np.linalg.solve(Z1.T, Z2.T).T
    n, nvi = Xp_h.shape[0], Xp_vh.shape[0]
    return DynamicsEstimate(J, J[:, :n], J[:, n:n + nvi], J[:, n + nvi:])


def propagation_operator(dyn: DynamicsEstimate, Gamma_h, Gamma_vh, K_h):
    """``T1`` with ``x(2i + c) = T1 [Xf_vh; Ef_h; Yf]`` at column ``c``."""
    G_pinv = pseudo_inverse(Gamma_h)
    AG = dyn.A1_i @ G_pinv
    return np.hstack([dyn.Phi_vh - AG @ Gamma_vh, dyn.L_h - AG @ K_h, AG])


@dataclass
class AssembledStates:
    values: np.ndarray
    overlap_discrepancy: float
    gap_filled: bool


def assemble_states(Xp_h, Xf_h, Xf_plus, i, j, M):
    """Place the three state sequences on rows ``0..2i+j-2`` of the grid.

    ``Xp_h`` covers rows ``0..j-1``, ``Xf_h`` rows ``i..i+j-1`` and
    ``Xf_plus`` rows ``2i..2i+j-2``. Earlier sequences win where they
    overlap; the relative mismatch on the ``Xp_h`` / ``Xf_plus`` overlap is
    reported.

    Returns
    -------
    AssembledStates
        ``values`` has shape ``(2i+j-1, M+1, n)``.
    """
    n = Xp_h.shape[0]
    K = M + 1
    N1 = 2 * i + j - 1

    def grid(X, width):
        return X.reshape(n, K, width).transpose(2, 1, 0)

    out = np.full((N1, K, n), np.nan)
    out[2 * i:] = grid(Xf_plus, j)[:j - 1]
    out[i:i + j] = grid(Xf_h, j)
    out[:j] = grid(Xp_h, j)
    lo, hi = 2 * i, j  # overlap rows of Xp_h and Xf_plus
    disc = 0.0
    if hi > lo:
        a = grid(Xp_h, j)[lo:hi]
        b = grid(Xf_plus, j)[:hi - lo]
        denom = np.linalg.norm(a)
        disc = float(np.linalg.norm(a - b) / denom) if denom > 0 else float(np.linalg.norm(b))
    if np.isnan(out).any():
        raise NumericalError("state assembly left rows uncovered")
    return AssembledStates(out, disc, j < 2 * i)
