"""Block-Hankel, bold (column-concatenated) and star (BTHB) data matrices.

A Hankel block of depth ``i`` and width ``j`` taken from column ``k`` of a
grid, starting at row ``r0``, has block ``(a, c)`` equal to
``v[r0 + a + c, k]``. The bold matrix puts these side by side for
``k = 0..M``; the star matrix arranges them as an upper block-triangular
Toeplitz array.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GridSizeError, InputError
from .grid import GridData


def _values(source):
    if isinstance(source, GridData):
        return source.values
    v = np.asarray(source, dtype=float)
    return v[:, :, None] if v.ndim == 2 else v


def check_extents(N, i, j, strict=True):
    """Validate ``N = 2i + j - 2`` (or ``>=`` when not strict)."""
    if i < 1 or j < 1:
        raise GridSizeError("i and j must be positive")
    need = 2 * i + j - 2
    if N < need or (strict and N != need):
        rel = "=" if strict else ">="
        raise GridSizeError(f"grid has N={N} but N {rel} 2i+j-2 = {need} is required "
                            f"(i={i}, j={j})")


@dataclass(frozen=True)
class HankelBlock:
    k: int
    r_start: int
    i: int
    j: int
    matrix: np.ndarray


def build_hankel(source, k, r_start, i, j) -> HankelBlock:
    """Depth-``i``, width-``j`` Hankel block from grid column ``k``.

    Raises
    ------
    GridSizeError
        ``r_start + i + j - 2`` exceeds ``N`` or ``k`` is out of range.
    """
    v = _values(source)
    N, M = v.shape[0] - 1, v.shape[1] - 1
    if i < 1 or j < 1 or r_start < 0:
        raise GridSizeError("i, j must be positive and r_start nonnegative")
    if r_start + i + j - 2 > N:
        raise GridSizeError(f"r_start + i + j - 2 = {r_start + i + j - 2} exceeds N = {N}")
    if not 0 <= k <= M:
        raise GridSizeError(f"column k={k} outside 0..{M}")
    seg = v[r_start:r_start + i + j - 1, k, :]
    win = sliding_window_view(seg, i, axis=0)  # (j, n, i): [c, p, a]
    mat = win.transpose(2, 1, 0).reshape(i * v.shape[2], j)
    return HankelBlock(k, r_start, i, j, np.ascontiguousarray(mat))


def bold(source, r_start, i, j, M=None):
    """Hankel blocks for ``k = 0..M`` concatenated horizontally.

    Returns an ``(n*i, j*(M+1))`` array whose column block ``k`` is
    ``build_hankel(source, k, r_start, i, j).matrix``.
    """
    v = _values(source)
    N = v.shape[0] - 1
    M = v.shape[1] - 1 if M is None else M
    if M > v.shape[1] - 1:
        raise GridSizeError("M exceeds the grid")
    if i < 1 or j < 1 or r_start < 0:
        raise GridSizeError("i, j must be positive and r_start nonnegative")
    if r_start + i + j - 2 > N:
        raise GridSizeError(f"r_start + i + j - 2 = {r_start + i + j - 2} exceeds N = {N}")
    seg = v[r_start:r_start + i + j - 1, :M + 1, :]
    win = sliding_window_view(seg, i, axis=0)  # (j, M+1, n, i): [c, k, p, a]
    n = v.shape[2]
    return np.ascontiguousarray(win.transpose(3, 2, 1, 0).reshape(i * n, (M + 1) * j))


@dataclass(frozen=True)
class BoldMatrix:
    blocks: tuple
    matrix: np.ndarray

    def block(self, k):
        return self.blocks[k].matrix


def build_bold(source, r_start, i, j, M=None) -> BoldMatrix:
    v = _values(source)
    M = v.shape[1] - 1 if M is None else M
    mat = bold(v, r_start, i, j, M)
    blocks = tuple(HankelBlock(k, r_start, i, j, mat[:, k * j:(k + 1) * j]) for k in range(M + 1))
    return BoldMatrix(blocks, mat)


def split_columns(mat, j):
    """Split a bold matrix back into its ``j``-wide column blocks."""
    return [mat[:, k * j:(k + 1) * j] for k in range(mat.shape[1] // j)]


def build_star(blocks):
    """Upper block-triangular Toeplitz array: block ``(a, b)`` is ``blocks[b - a]``."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise InputError("need at least one block")
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks):
        raise InputError("all star generator blocks must share one shape")
    n = len(blocks)
    r, c = shape
    out = np.zeros((r * n, c * n))
    for a in range(n):
        for b in range(a, n):
            out[a * r:(a + 1) * r, b * c:(b + 1) * c] = blocks[b - a]
    return out


def hankel_from_generators(gens, i):
    """Hankel matrix with block ``(a, c) = gens[a + c]``; ``gens`` is ``(L, n)``."""
    gens = np.asarray(gens, dtype=float)
    win = sliding_window_view(gens, i, axis=0)  # (j, n, i)
    return np.ascontiguousarray(win.transpose(2, 1, 0).reshape(i * gens.shape[1], -1))


def empirical_autocovariance(Y, k, l):
    """Average of ``y[r+k, s+l] y[r, s]^T`` over every valid ``(r, s)``."""
    v = _values(Y)
    N, M = v.shape[0] - 1, v.shape[1] - 1
    if k < 0 or l < 0:
        raise InputError("lags must be nonnegative")
    if k > N or l > M:
        raise InputError("lag exceeds grid extents; nothing to average")
    a = v[k:, l:].reshape(-1, v.shape[2])
    b = v[:N + 1 - k, :M + 1 - l].reshape(-1, v.shape[2])
    return a.T @ b / a.shape[0]
