"""Binary state snapshots.

Layout: 16-byte header (magic b"DYAD", u32 version, u32 branching, u32
depth, all little-endian) followed by node_count little-endian IEEE doubles
in heap order.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import ClassicState, ModelParams, State, TreeState, node_count

MAGIC = b"DYAD"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def dump_state(state: State, path) -> None:
    params = state.params
    header = _HEADER.pack(MAGIC, VERSION, params.branching, params.depth)
    values = np.ascontiguousarray(state.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())


def load_state(path, params: ModelParams) -> State:
    """Read a snapshot; the caller supplies the model parameters, which must
    agree with the header's branching and depth."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, branching, depth = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        if branching != params.branching or depth != params.depth:
            raise ValueError(
                f"{path}: header (branching={branching}, depth={depth}) does not "
                f"match params (branching={params.branching}, depth={params.depth})")
        n = node_count(branching, depth, params.max_nodes)
        data = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if data.shape[0] != n:
            raise ValueError(f"{path}: expected {n} values, got {data.shape[0]}")
    values = data.astype(np.float64)
    if branching == 1:
        return ClassicState(values, params)
    return TreeState(values, params)
