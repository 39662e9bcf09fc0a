"""Stage 1: orthogonal projection of future onto past outputs along one axis."""
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, OrderSelectionError
from ..grid import GridData
from ..hankel import bold, check_extents
from ..linalg import pseudo_inverse, rq_decompose

RATIO_MIN = 5.0


@dataclass
class ProjectionResult:
    """Outcome of one orthogonal projection.

    ``state_map`` sends a stacked past-output window (oldest first, depth
    ``i``) to the state estimate that follows it: ``Xf = state_map @ Yp``.
    """
    O: np.ndarray
    singular_values: np.ndarray
    n: int
    Gamma: np.ndarray
    Xf: np.ndarray
    state_map: np.ndarray
    i: int
    j: int
    direction: str
    zero_data: bool = False


def select_order(sv, n_max):
    """Index of the largest gap ``sv[n-1] / sv[n]`` among the leading values.

    Raises
    ------
    OrderSelectionError
        No ratio reaches :data:`RATIO_MIN`.
    """
    sv = np.asarray(sv, dtype=float)
    top = min(10, n_max, sv.size - 1)
    if top < 1:
        raise OrderSelectionError("too few singular values to pick an order", sv)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = sv[:top] / sv[1:top + 1]
    ratios = np.where(np.isnan(ratios), 0.0, ratios)
    n = int(np.argmax(ratios)) + 1
    if ratios[n - 1] < RATIO_MIN:
        raise OrderSelectionError(
            f"no clear singular-value gap (best ratio {ratios[n - 1]:.3g} < {RATIO_MIN}); "
            "give the order explicitly", sv)
    return n


def oriented(Y: GridData, direction):
    if direction == "horizontal":
        return Y
    if direction == "vertical":
        return Y.transpose()
    raise InputError("direction must be 'horizontal' or 'vertical'")


def stage1_project(Y: GridData, i, j, direction="horizontal", order=None, strict=True,
                   keep_projection=True) -> ProjectionResult:
    """Orthogonal projection ``Yf / Yp``, its SVD, and a state-sequence estimate.

    Parameters
    ----------
    Y : GridData
        Output grid. The vertical direction processes the transposed grid.
    i, j : int
        Hankel depth and width; requires ``N = 2i + j - 2`` along the
        processed axis (``>=`` when ``strict`` is False).
    order : int, optional
        State dimension. Chosen from the singular-value gap when omitted.

    Returns
    -------
    ProjectionResult
    """
    G = oriented(Y, direction)
    check_extents(G.N, i, j, strict=strict)
    ny = G.n
    Yp = bold(G, 0, i, j)
    Yf = bold(G, i, i, j)
    if order is not None and not 0 <= order <= ny * i:
        raise InputError(f"order {order} must lie in [0, n_y*i = {ny * i}]")
    if not np.any(Yp):
        sv = np.zeros(ny * i)
        return ProjectionResult(np.zeros_like(Yf), sv, 0, np.zeros((ny * i, 0)),
                                np.zeros((0, Yf.shape[1])), np.zeros((0, ny * i)),
                                i, j, direction, zero_data=True)
    L, Q, deficient = rq_decompose(Yp)
    if deficient:
        # drop dependent directions of the past
        d = np.abs(np.diag(L))
        keep = d > 1e-10 * d.max()
        L, Q = L[np.ix_(keep, keep)], Q[keep]
    Z = Yf @ Q.T
    U, s, Wt = np.linalg.svd(Z, full_matrices=False)
    # dropped past directions contribute exact zeros to the spectrum
    s = np.concatenate([s, np.zeros(ny * i - s.size)])
    n = select_order(s, ny * i - 1) if order is None else int(order)
    if n > U.shape[1]:
        raise InputError(f"order {n} exceeds the rank {U.shape[1]} of the past outputs")
    sq = np.sqrt(s[:n])
    Gamma = U[:, :n] * sq
    Xf = (sq[:, None] * Wt[:n]) @ Q
    O = (Z @ Q) if keep_projection else None
    if deficient:
        state_map = pseudo_inverse(Gamma) @ (Z @ Q) @ pseudo_inverse(Yp)
    else:
        state_map = pseudo_inverse(Gamma) @ Z @ np.linalg.inv(L)
    return ProjectionResult(O, s, n, Gamma, Xf, state_map, i, j, direction)


def truncated_maps(Yp, Xf, i, ny):
    """Regressions of ``Xf`` on the most recent ``m`` output blocks, ``m = 1..i``.

    Entry ``m`` (``m >= 1``) maps a window of the last ``m`` outputs (oldest
    first) to the state estimate; used where fewer than ``i`` outputs precede
    a grid site.
    """
    maps = [None]
    for mdepth in range(1, i + 1):
        rows = Yp[(i - mdepth) * ny:]
        G = rows @ rows.T
        maps.append(np.linalg.solve(G + 1e-12 * np.trace(G) * np.eye(G.shape[0]) / G.shape[0],
                                    rows @ Xf.T).T)
    return maps


def filter_states(G: GridData, maps, i, n):
    """Apply past-window maps at every grid site along axis 0.

    Site ``r`` uses outputs ``r - m .. r - 1`` with ``m = min(r, i)``; the
    state at ``r = 0`` is zero.

    Returns
    -------
    (N+1, M+1, n) ndarray
    """
    v = G.values
    N1, M1, ny = v.shape
    out = np.zeros((N1, M1, n))
    for r in range(1, N1):
        mdepth = min(r, i)
        win = v[r - mdepth:r].transpose(1, 0, 2).reshape(M1, mdepth * ny)
        out[r] = win @ maps[mdepth].T
    return out


def stage1_states(Y: GridData, proj: ProjectionResult, strict=True):
    """Full-grid state estimates from a stage-1 projection, in grid orientation.

    Returns a GridData of shape ``(N+1, M+1, n)`` for the original grid.
    """
    G = oriented(Y, proj.direction)
    i, j, n = proj.i, proj.j, proj.n
    ny = G.n
    if n == 0:
        vals = np.zeros((G.N + 1, G.M + 1, 0))
    else:
        Yp = bold(G, 0, i, j)
        maps = truncated_maps(Yp, proj.Xf, i, ny)
        maps[i] = proj.state_map
        vals = filter_states(G, maps, i, n)
    out = GridData(vals)
    return out if proj.direction == "horizontal" else out.transpose()
