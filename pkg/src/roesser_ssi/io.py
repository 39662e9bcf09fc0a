"""Grid and model file formats.

Text grids start with ``R2D1 n N M`` followed by one line ``r s v_0 ... v_{n-1}``
per site, ``r`` outer, values with 17 significant digits. Binary grids start
with the magic ``R2DB`` and three little-endian uint64 ``n N M``, then the
values as little-endian float64 in the same order. JSON grids hold
``{"format": "R2D1", "n", "N", "M", "values"}`` with ``values`` nested as
``[r][s][component]``.
"""
import json
import struct

import numpy as np

from .errors import InputError
from .grid import GridData
from .model import RoesserModel

TEXT_MAGIC = "R2D1"
BINARY_MAGIC = b"R2DB"


def format_grid_text(G: GridData) -> str:
    v = G.values
    lines = [f"{TEXT_MAGIC} {G.n} {G.N} {G.M}"]
    for r in range(G.N + 1):
        for s in range(G.M + 1):
            vals = " ".join(f"{x:.17g}" for x in v[r, s])
            lines.append(f"{r} {s} {vals}".rstrip())
    return "\n".join(lines) + "\n"


def parse_grid_text(text: str) -> GridData:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty grid file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != TEXT_MAGIC:
        raise InputError(f"grid header must be '{TEXT_MAGIC} n N M'")
    try:
        n, N, M = (int(x) for x in head[1:])
    except ValueError as exc:
        raise InputError("grid header sizes must be integers") from exc
    if n < 0 or N < 0 or M < 0:
        raise InputError("grid header sizes must be nonnegative")
    body = lines[1:]
    if len(body) != (N + 1) * (M + 1):
        raise InputError(f"expected {(N + 1) * (M + 1)} data lines, found {len(body)}")
    try:
        arr = np.array([ln.split() for ln in body], dtype=float) if n else None
    except ValueError as exc:
        raise InputError("grid data lines must hold r, s and n values") from exc
    if n == 0:
        return GridData(np.zeros((N + 1, M + 1, 0)))
    if arr.ndim != 2 or arr.shape[1] != n + 2:
        raise InputError(f"each data line needs r, s and {n} values")
    rs = arr[:, :2].astype(int)
    expect = np.stack(np.meshgrid(np.arange(N + 1), np.arange(M + 1), indexing="ij"), -1)
    if not np.array_equal(rs, expect.reshape(-1, 2)):
        raise InputError("grid lines must list (r, s) in row-major order")
    return GridData(arr[:, 2:].reshape(N + 1, M + 1, n))


def grid_to_bytes(G: GridData) -> bytes:
    head = BINARY_MAGIC + struct.pack("<3Q", G.n, G.N, G.M)
    return head + np.ascontiguousarray(G.values, dtype="<f8").tobytes()


def grid_from_bytes(data: bytes) -> GridData:
    if len(data) < 28 or data[:4] != BINARY_MAGIC:
        raise InputError("not an R2DB binary grid")
    n, N, M = struct.unpack("<3Q", data[4:28])
    count = n * (N + 1) * (M + 1)
    if len(data) != 28 + 8 * count:
        raise InputError("binary grid payload has the wrong length")
    vals = np.frombuffer(data, dtype="<f8", offset=28, count=count)
    return GridData(vals.reshape(N + 1, M + 1, n).astype(float))


def grid_to_json(G: GridData) -> str:
    return json.dumps({"format": TEXT_MAGIC, "n": G.n, "N": G.N, "M": G.M,
                       "values": G.values.tolist()}) + "\n"


def grid_from_json(text: str) -> GridData:
    try:
        d = json.loads(text)
        vals = np.array(d["values"], dtype=float)
        n, N, M = int(d["n"]), int(d["N"]), int(d["M"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed JSON grid: {exc}") from exc
    if vals.size == 0:
        vals = np.zeros((N + 1, M + 1, n))
    if vals.shape != (N + 1, M + 1, n):
        raise InputError("JSON grid values do not match the declared extents")
    return GridData(vals)


def write_grid(path, G: GridData, fmt="text"):
    if fmt == "json":
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(grid_to_json(G))
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(grid_to_bytes(G))
    elif fmt == "text":
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(format_grid_text(G))
    else:
        raise InputError(f"unknown grid format {fmt!r}")


def read_grid(path) -> GridData:
    """Read a text, binary or JSON grid, detected from the leading bytes."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read grid file {path}: {exc}") from exc
    if data[:4] == BINARY_MAGIC:
        return grid_from_bytes(data)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise InputError("grid file is neither R2D1 text nor R2DB binary") from exc
    if text.lstrip().startswith("{"):
        return grid_from_json(text)
    return parse_grid_text(text)


def read_model(path) -> RoesserModel:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise InputError("model JSON must be an object")
    try:
        return RoesserModel.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise InputError(f"model JSON is missing or has malformed fields: {exc}") from exc


def write_model(path, m: RoesserModel):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(m.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
