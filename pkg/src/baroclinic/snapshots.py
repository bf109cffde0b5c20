"""Binary snapshot files.

``BQGS`` holds a limit-model state, ``BAPX`` an assembled approximate
solution.  Both start with the little-endian header ``<4s4I6d``: magic,
version, Nx, Ny, Nz, then Lx, Ly, B, Ro, H, t.  Arrays follow as ``<f8`` in
C order (x fastest).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dispersion import Params
from .grid import Grid

__all__ = [
    "SnapshotError",
    "APPROX_FIELDS",
    "write_qg_snapshot",
    "read_qg_snapshot",
    "write_approx_snapshot",
    "read_approx_snapshot",
]

HEADER = struct.Struct("<4s4I6d")
COUNT = struct.Struct("<I")
VERSION = 1
APPROX_FIELDS = ("p_N", "u_N", "v_N", "w_N", "theta_N", "p_e1", "u_e1", "v_e1", "w_e1", "theta_e1")


class SnapshotError(OSError):
    pass


def _header(magic, grid, params, t):
    return HEADER.pack(magic, VERSION, grid.Nx, grid.Ny, grid.Nz, grid.Lx, grid.Ly, params.B, params.Ro, params.H, t)


def _read_header(buf, magic):
    if len(buf) < HEADER.size:
        raise SnapshotError("file too short for a header")
    tag, ver, nx, ny, nz, lx, ly, B, Ro, H, t = HEADER.unpack_from(buf)
    if tag != magic:
        raise SnapshotError(f"bad magic {tag!r}, expected {magic!r}")
    if ver != VERSION:
        raise SnapshotError(f"unsupported version {ver}")
    return Grid(nx, ny, nz, lx, ly), Params(B, Ro, H), t


def _arrays(buf, offset, shapes):
    out = []
    for shape in shapes:
        n = int(np.prod(shape))
        end = offset + 8 * n
        if end > len(buf):
            raise SnapshotError("truncated snapshot")
        out.append(np.frombuffer(buf, "<f8", n, offset).reshape(shape).copy())
        offset = end
    if offset != len(buf):
        raise SnapshotError(f"{len(buf) - offset} trailing bytes")
    return out


def _write(path, chunks):
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            for c in chunks:
                fh.write(c if isinstance(c, bytes) else np.ascontiguousarray(c, dtype="<f8").tobytes())
    except OSError as err:
        raise SnapshotError(f"cannot write {path}: {err}") from err


def _read(path):
    try:
        return Path(path).read_bytes()
    except OSError as err:
        raise SnapshotError(f"cannot read {path}: {err}") from err


def write_qg_snapshot(path, state, grid: Grid, params: Params) -> None:
    grid.check(state.q_int, state.theta_bot, state.theta_top)
    _write(path, [_header(b"BQGS", grid, params, state.t), state.q_int, state.theta_bot, state.theta_top])


def read_qg_snapshot(path):
    """Return ``(state, grid, params)``."""
    from .qg_core import QGState

    buf = _read(path)
    grid, params, t = _read_header(buf, b"BQGS")
    q, tb, tt = _arrays(buf, HEADER.size, [grid.shape, grid.hshape, grid.hshape])
    return QGState(t, q, tb, tt), grid, params


def write_approx_snapshot(path, fields: dict, rates: dict, grid: Grid, params: Params, t: float) -> None:
    """Ten field blocks in ``APPROX_FIELDS`` order, then their ten time derivatives."""
    blocks = [fields[k] for k in APPROX_FIELDS] + [rates[k] for k in APPROX_FIELDS]
    for b in blocks:
        if np.shape(b) != grid.shape:
            raise ValueError(f"block of shape {np.shape(b)} does not match grid {grid.shape}")
    _write(path, [_header(b"BAPX", grid, params, t), COUNT.pack(len(blocks))] + blocks)


def read_approx_snapshot(path):
    """Return ``(fields, rates, grid, params, t)``."""
    buf = _read(path)
    grid, params, t = _read_header(buf, b"BAPX")
    if len(buf) < HEADER.size + COUNT.size:
        raise SnapshotError("truncated snapshot")
    (count,) = COUNT.unpack_from(buf, HEADER.size)
    if count != 2 * len(APPROX_FIELDS):
        raise SnapshotError(f"expected {2 * len(APPROX_FIELDS)} blocks, found {count}")
    arrs = _arrays(buf, HEADER.size + COUNT.size, [grid.shape] * count)
    n = len(APPROX_FIELDS)
    return dict(zip(APPROX_FIELDS, arrs[:n])), dict(zip(APPROX_FIELDS, arrs[n:])), grid, params, t
