"""Vector-valued data on a rectangular 2-D grid."""
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class GridData:
    """Vectors ``v[r, s]`` for ``0 <= r <= N`` and ``0 <= s <= M``.

    ``values`` has shape ``(N + 1, M + 1, n)``; axis 0 runs along the
    horizontal index ``r`` and axis 1 along the vertical index ``s``.
    """
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise InputError("grid values must have shape (N+1, M+1, n)")
        if not np.all(np.isfinite(v)):
            raise InputError("grid contains non-finite entries")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.values.shape[0] - 1

    @property
    def M(self):
        return self.values.shape[1] - 1

    @property
    def n(self):
        return self.values.shape[2]

    def transpose(self):
        """Swap the roles of ``r`` and ``s``."""
        return GridData(self.values.transpose(1, 0, 2))

    def crop(self, N, M):
        """Keep ``r <= N`` and ``s <= M``."""
        if N > self.N or M > self.M:
            raise InputError("crop extents exceed the grid")
        return GridData(self.values[:N + 1, :M + 1])

    def __eq__(self, other):
        return isinstance(other, GridData) and np.array_equal(self.values, other.values)

    __hash__ = None
