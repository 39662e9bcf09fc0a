"""Dense decompositions and structure-constrained least squares.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects; ``vec`` is column-major throughout, so
``vec(X) == X.reshape(-1, order="F")``.

Compact parameter ordering for structured matrices with ``br x bc`` blocks:
the generator blocks are stacked as ``[vec(T_0); vec(T_1); ...]`` where
each ``T_d`` is itself vec'd column-major.
"""
import contextvars
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import IllConditionedError, InputError, RankDeficiencyError

RANK_RTOL = 1e-10
COND_LIMIT = 1e12

_WORKERS = contextvars.ContextVar("solve_workers", default=1)


@contextmanager
def solve_workers(n):
    """Cap the threads used for independent right-hand sides in batched solves."""
    token = _WORKERS.set(max(1, int(n)))
    try:
        yield
    finally:
        _WORKERS.reset(token)


def _banded_solve(cf, rhs):
    """``cho_solve_banded`` with the columns split over the configured workers.

    Columns are solved independently, so the result does not depend on the
    split.
    """
    workers = min(_WORKERS.get(), rhs.shape[1])
    if workers <= 1:
        return sla.cho_solve_banded((cf, False), rhs)
    parts = np.array_split(np.arange(rhs.shape[1]), workers)
    with ThreadPoolExecutor(workers) as pool:
        out = list(pool.map(lambda c: sla.cho_solve_banded((cf, False), rhs[:, c]), parts))
    return np.hstack(out)


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape((rows, cols), order="F")


class RQResult(NamedTuple):
    L: np.ndarray
    Q: np.ndarray
    rank_deficient: bool


def rq_decompose(M) -> RQResult:
    """Factor ``M = L @ Q`` with ``L`` lower triangular and ``Q Q^T = I``.

    Computed from the QR factorisation of ``M^T``. The diagonal of ``L`` is
    made nonnegative. Rank deficiency is tolerated and flagged.

    Parameters
    ----------
    M : (m, n) array_like
        Requires ``n >= m``.

    Returns
    -------
    RQResult
        ``(L, Q, rank_deficient)``.
    """
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    if n < m:
        raise InputError(f"rq_decompose needs cols >= rows, got {m}x{n}")
    Qt, Rt = sla.qr(M.T, mode="economic")
    signs = np.where(np.diag(Rt) < 0, -1.0, 1.0)
    L = (signs[:, None] * Rt).T
    Q = signs[:, None] * Qt.T
    d = np.abs(np.diag(L))
    scale = d.max() if d.size else 0.0
    deficient = bool(d.size and (scale == 0 or d.min() <= RANK_RTOL * scale))
    return RQResult(L, Q, deficient)


def row_space_project(F, P, regularize=False):
    """Orthogonal projection of the rows of ``F`` onto the row space of ``P``.

    Equivalent to ``F P^T (P P^T)^{-1} P`` but evaluated through the LQ
    factor of ``P``.

    Parameters
    ----------
    F, P : array_like
        Same number of columns.
    regularize : bool
        If the Gram matrix ``P P^T`` has condition number above ``1e12``,
        fall back to a ridge solve instead of raising.

    Raises
    ------
    IllConditionedError
        Gram matrix too ill conditioned and ``regularize`` is False.
    """
    F = np.asarray(F, dtype=float)
    P = np.asarray(P, dtype=float)
    if F.shape[1] != P.shape[1]:
        raise InputError("F and P must have the same number of columns")
    L, Q, _ = rq_decompose(P)
    s = np.linalg.svd(L, compute_uv=False)
    cond = np.inf if s[-1] == 0 else (s[0] / s[-1]) ** 2
    if cond <= COND_LIMIT:
        return (F @ Q.T) @ Q
    if not regularize:
        raise IllConditionedError(
            f"P P^T is ill conditioned (cond ~ {cond:.3e})", condition=cond)
    G = P @ P.T
    lam = 1e-10 * np.trace(G) / G.shape[0]
    if lam == 0:
        return np.zeros_like(F)
    W = sla.solve(G + lam * np.eye(G.shape[0]), P @ F.T, assume_a="pos")
    return W.T @ P


def pseudo_inverse(M):
    """Moore-Penrose inverse with relative singular-value cutoff ``1e-10``."""
    return np.linalg.pinv(np.asarray(M, dtype=float), rcond=RANK_RTOL)


def orth_complement(M):
    """Orthonormal rows spanning the left null space of ``M``.

    Returns a ``(rows - rank) x rows`` matrix ``W`` with ``W @ M == 0``.
    """
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    if rows <= cols:
        raise InputError(f"no orthogonal complement for a {rows}x{cols} matrix")
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    return U[:, rank:].T.copy()


# ---------------------------------------------------------------------------
# structure maps

@dataclass(frozen=True)
class StructureMap:
    """0/1 matrix sending compact generators to ``vec`` of the full matrix.

    For the Toeplitz kind, rows corresponding to the structural zeros above
    the block diagonal are all-zero.
    """
    kind: str
    block_rows: int
    block_cols: int
    i: int
    j: int
    matrix: sp.csr_matrix

    @property
    def full_shape(self):
        cols = self.block_cols * (self.i if self.kind == "toeplitz" else self.j)
        return self.block_rows * self.i, cols

    @property
    def n_params(self):
        return self.matrix.shape[1]

    def expand(self, theta):
        rows, cols = self.full_shape
        return unvec(self.matrix @ np.asarray(theta, dtype=float), rows, cols)

    def compress(self, X):
        """Least-squares compact vector: the average over repeated entries."""
        counts = np.asarray(self.matrix.sum(axis=0)).ravel()
        return (self.matrix.T @ vec(X)) / counts


def _block_index(br, bc, nrows_full, a, b, p, q):
    row = a * br + p
    col = b * bc + q
    return col * nrows_full + row


def structure_map(kind, block_rows, block_cols, i, j=None) -> StructureMap:
    """Build the 0/1 map for a lower-block-Toeplitz or block-Hankel matrix.

    Parameters
    ----------
    kind : {"toeplitz", "hankel"}
    block_rows, block_cols : int
        Size of each block.
    i : int
        Number of block rows (and block columns for the Toeplitz kind).
    j : int, optional
        Number of block columns for the Hankel kind.
    """
    br, bc = int(block_rows), int(block_cols)
    if i < 1:
        raise InputError("i must be >= 1")
    nb = br * bc
    p, q = np.meshgrid(np.arange(br), np.arange(bc), indexing="ij")
    p, q = p.ravel(), q.ravel()
    local = q * br + p  # column-major position inside a generator block
    rows_full = br * i
    if kind == "toeplitz":
        a, b = np.tril_indices(i)
        d = a - b
        ridx = _block_index(br, bc, rows_full, a[:, None], b[:, None], p, q)
        cidx = d[:, None] * nb + local
        shape = (br * bc * i * i, nb * i)
        jj = i
    elif kind == "hankel":
        if j is None or j < 1:
            raise InputError("j must be >= 1 for the Hankel kind")
        a, b = np.meshgrid(np.arange(i), np.arange(j), indexing="ij")
        a, b = a.ravel(), b.ravel()
        ridx = _block_index(br, bc, rows_full, a[:, None], b[:, None], p, q)
        cidx = (a + b)[:, None] * nb + local
        shape = (br * bc * i * j, nb * (i + j - 1))
        jj = j
    else:
        raise InputError(f"unknown structure kind {kind!r}")
    ridx, cidx = ridx.ravel(), cidx.ravel()
    mat = sp.csr_matrix((np.ones(ridx.size), (ridx, cidx)), shape=shape)
    return StructureMap(kind, br, bc, i, jj, mat)


def block_toeplitz(blocks):
    """Lower-block-triangular Toeplitz matrix from generator blocks."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    i = len(blocks)
    br, bc = blocks[0].shape
    X = np.zeros((br * i, bc * i))
    for a in range(i):
        for b in range(a + 1):
            X[a * br:(a + 1) * br, b * bc:(b + 1) * bc] = blocks[a - b]
    return X


def block_hankel(blocks, i):
    """Block-Hankel matrix with ``i`` block rows from ``i + j - 1`` blocks."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    j = len(blocks) - i + 1
    if j < 1:
        raise InputError("need at least i generator blocks")
    br, bc = blocks[0].shape
    X = np.zeros((br * i, bc * j))
    for a in range(i):
        for b in range(j):
            X[a * br:(a + 1) * br, b * bc:(b + 1) * bc] = blocks[a + b]
    return X


def _theta_to_blocks(theta, br, bc):
    theta = np.asarray(theta, dtype=float)
    return [unvec(t, br, bc) for t in theta.reshape(-1, br * bc)]


# ---------------------------------------------------------------------------
# structured least squares

def _check_design_rank(D, rhs, what):
    sol, _, rank, sv = np.linalg.lstsq(D, rhs, rcond=RANK_RTOL)
    if rank < D.shape[1]:
        raise RankDeficiencyError(
            f"{what}: structure-restricted system has rank {rank} < {D.shape[1]}",
            rank=int(rank), size=D.shape[1])
    return sol


def _toeplitz_design(A, B, br, bc, i):
    """Columns are ``vec(A F_theta B)`` for each compact Toeplitz parameter."""
    m, p = A.shape[0], B.shape[1]
    A3 = A.reshape(m, i, br)
    B3 = B.reshape(i, bc, p)
    D = np.empty((m * p, i * br * bc))
    for d in range(i):
        # sum over block columns b with block row b + d
        T = np.einsum("mbx,byn->yxnm", A3[:, d:, :], B3[:i - d])
        D[:, d * br * bc:(d + 1) * br * bc] = T.reshape(br * bc, -1).T
    return D


def lttss(A, B, C, block_rows, block_cols, i):
    """Solve ``A X B = C`` in least squares over lower-block-Toeplitz ``X``.

    Parameters
    ----------
    A : (m, block_rows*i) array_like
    B : (block_cols*i, p) array_like
    C : (m, p) array_like
    block_rows, block_cols, i : int

    Returns
    -------
    X : (block_rows*i, block_cols*i) ndarray
        Exactly lower-block-triangular Toeplitz.

    Raises
    ------
    RankDeficiencyError
        The structure-restricted problem has no unique solution.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    br, bc = int(block_rows), int(block_cols)
    if A.shape[1] != br * i or B.shape[0] != bc * i:
        raise InputError("lttss: A or B inconsistent with block sizes")
    if C.shape != (A.shape[0], B.shape[1]):
        raise InputError("lttss: C has the wrong shape")
    D = _toeplitz_design(A, B, br, bc, i)
    theta = _check_design_rank(D, vec(C), "lttss")
    return block_toeplitz(_theta_to_blocks(theta, br, bc))


def lttss_kron(A, B, C, block_rows, block_cols, i):
    """Reference solver through the explicit Kronecker product (tests only)."""
    smap = structure_map("toeplitz", block_rows, block_cols, i)
    D = np.kron(np.asarray(B).T, np.asarray(A)) @ smap.matrix.toarray()
    theta = _check_design_rank(D, vec(C), "lttss_kron")
    return smap.expand(theta)


def _hankel_design(A, B, br, bc, i, j):
    m, p = A.shape[0], B.shape[1]
    A3 = A.reshape(m, i, br)
    B3 = B.reshape(j, bc, p)
    ng = i + j - 1
    D = np.zeros((ng, bc, br, p, m))
    for a in range(i):
        D[a:a + j] += np.einsum("mx,byn->byxnm", A3[:, a, :], B3)
    return D.reshape(ng * bc * br, p * m).T


def hss_kron(A, B, C, block_rows, block_cols, i, j):
    """Reference Hankel solver through the explicit Kronecker product."""
    smap = structure_map("hankel", block_rows, block_cols, i, j)
    D = np.kron(np.asarray(B).T, np.asarray(A)) @ smap.matrix.toarray()
    theta = _check_design_rank(D, vec(C), "hss_kron")
    return smap.expand(theta)


def _is_identity(B):
    return B.shape[0] == B.shape[1] and np.array_equal(B, np.eye(B.shape[0]))


def hss(A, B, C, block_rows, block_cols, i, j, **kwargs):
    """Solve ``A X B = C`` in least squares over block-Hankel ``X``.

    ``X`` has ``i x j`` blocks of size ``block_rows x block_cols`` built
    from ``i + j - 1`` generators. When ``B`` is the identity (or None) and
    ``block_cols == 1`` the banded fast path :func:`hss_identity` is used and
    ``kwargs`` are forwarded to it.

    Raises
    ------
    RankDeficiencyError
        The structure-restricted problem has no unique solution.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    br, bc = int(block_rows), int(block_cols)
    if A.shape[1] != br * i:
        raise InputError("hss: A inconsistent with block sizes")
    if B is None:
        B = np.eye(bc * j)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != bc * j or C.shape != (A.shape[0], B.shape[1]):
        raise InputError("hss: B or C inconsistent with block sizes")
    if bc == 1 and _is_identity(B):
        gens = hss_identity(A, C[:, :, None], br, i, j, **kwargs)
        return block_hankel(list(gens[:, :, 0, None]), i)
    if kwargs:
        raise InputError("hss: constraints are only supported with B = I")
    D = _hankel_design(A, B, br, bc, i, j)
    theta = _check_design_rank(D, vec(C), "hss")
    return block_hankel(_theta_to_blocks(theta, br, bc), i)


def _banded_from_dense(N, bw):
    n = N.shape[0]
    ab = np.zeros((bw + 1, n))
    for k in range(bw + 1):
        ab[bw - k, k:] = np.diagonal(N, k)
    return ab


def hss_identity(A, C, block_rows, i, j, fixed_leading=None, lead_penalty=None,
                 regularize=False):
    """Batched Hankel solver for ``A X_k = C_k`` with ``X_k`` block Hankel.

    Each ``X_k`` has ``i x j`` blocks of size ``block_rows x 1``. All right
    hand sides share one banded normal matrix, factored once.

    Parameters
    ----------
    A : (m, block_rows*i) ndarray
    C : (m, j, K) ndarray
        One right-hand side per trailing index.
    fixed_leading : (nf, block_rows, K) ndarray, optional
        Values for the leading ``nf`` generators of each problem.
    lead_penalty : tuple (D, d), optional
        Soft constraint ``D @ x_0 = d_k`` on the first column
        ``x_0 = [g_0; ...; g_{i-1}]`` with ``D`` of shape ``(q, block_rows*i)``
        and ``d`` of shape ``(q, K)``. Weighted to balance the data term.
    regularize : bool
        Add a small ridge instead of raising on a singular normal matrix.

    Returns
    -------
    gens : (i + j - 1, block_rows, K) ndarray
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    br = int(block_rows)
    m = A.shape[0]
    K = C.shape[2]
    ng = i + j - 1
    n = ng * br
    Ab = A.reshape(m, i, br)

    G = np.einsum("max,mby->axby", Ab, Ab)
    N4 = np.zeros((ng, br, ng, br))
    idx = np.arange(j)
    for a in range(i):
        for b in range(i):
            N4[idx + a, :, idx + b, :] += G[a, :, b, :]
    rhs = np.zeros((ng, br, K))
    for a in range(i):
        rhs[a:a + j] += np.einsum("mx,mjk->jxk", Ab[:, a, :], C)
    N = N4.reshape(n, n)
    rhs = rhs.reshape(n, K)

    if lead_penalty is not None:
        Dp, dp = lead_penalty
        Dp = np.asarray(Dp, dtype=float)
        dp = np.asarray(dp, dtype=float).reshape(Dp.shape[0], K)
        w = np.trace(N) / max(np.trace(Dp.T @ Dp), np.finfo(float).tiny) / ng
        q = Dp.shape[1]
        N[:q, :q] += w * (Dp.T @ Dp)
        rhs[:q] += w * (Dp.T @ dp)

    nf = 0
    sol = np.zeros((n, K))
    if fixed_leading is not None:
        fixed = np.asarray(fixed_leading, dtype=float)
        nf = fixed.shape[0] * br
        sol[:nf] = fixed.reshape(nf, K)
        rhs = rhs[nf:] - N[nf:, :nf] @ sol[:nf]
        N = N[nf:, nf:]
    if N.shape[0] == 0:
        return sol.reshape(ng, br, K)

    bw = br * i - 1
    ab = _banded_from_dense(N, min(bw, N.shape[0] - 1))
    scale = np.trace(N) / N.shape[0]
    if scale == 0:
        if regularize:
            return sol.reshape(ng, br, K)
        raise RankDeficiencyError("hss: zero operator", rank=0, size=N.shape[0])
    try:
        cf = sla.cholesky_banded(ab)
        dmin, dmax = np.min(np.abs(cf[-1])), np.max(np.abs(cf[-1]))
        ok = (dmin / dmax) ** 2 > 1.0 / COND_LIMIT
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        if not regularize:
            rank = np.linalg.matrix_rank(N, tol=RANK_RTOL ** 2 * np.abs(N).max() * N.shape[0])
            raise RankDeficiencyError(
                f"hss: normal equations singular (rank {rank} of {N.shape[0]})",
                rank=int(rank), size=N.shape[0])
        ab[-1] += 1e-10 * scale
        cf = sla.cholesky_banded(ab)
    sol[nf:] = _banded_solve(cf, rhs)
    return sol.reshape(ng, br, K)
