"""Binary field format: one JSON header line, then raw little-endian float64.

Every module reads and writes this layout.  Scalar fields store one value
block; tensor fields store ``d (d + 1) / 2`` named channels concatenated in
header order.  Values are row-major (C order) over cells.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction, make_grid

__all__ = ["write_field", "read_field", "write_channels", "read_channels"]


def _header(grid: Grid, count: int, channels: list[str] | None) -> bytes:
    head = {
        "dim": grid.dim,
        "cells": [grid.n] * grid.dim,
        "half_width": grid.half_width,
        "origin": list(grid.origin),
        "periodic": list(grid.periodic),
        "count": count,
        "dtype": "float64-le",
    }
    if channels is not None:
        head["channels"] = channels
    return (json.dumps(head, sort_keys=True) + "\n").encode("utf-8")


def _parse(path) -> tuple[dict, Grid, np.ndarray]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    head = json.loads(raw[:nl].decode("utf-8"))
    if head.get("dtype") != "float64-le":
        raise ValueError(f"unsupported dtype {head.get('dtype')!r}")
    cells = head["cells"]
    if len(set(cells)) != 1:
        raise ValueError("anisotropic cell counts are not supported")
    grid = make_grid(
        dim=head["dim"],
        n=cells[0],
        half_width=head["half_width"],
        periodic=tuple(head["periodic"]),
        origin=tuple(head.get("origin", [0.0] * head["dim"])),
    )
    data = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if data.size != head["count"]:
        raise ValueError(f"expected {head['count']} values, found {data.size}")
    return head, grid, data


def write_field(path, f: GridFunction) -> None:
    """Write one scalar field."""
    payload = f.values.ravel(order="C").astype("<f8").tobytes()
    Path(path).write_bytes(_header(f.grid, f.grid.size, None) + payload)


def read_field(path) -> GridFunction:
    """Read one scalar field."""
    head, grid, data = _parse(path)
    if "channels" in head:
        raise ValueError("file holds channels; use read_channels")
    return GridFunction(grid, data.reshape(grid.shape))


def write_channels(path, grid: Grid, channels: dict[str, np.ndarray]) -> None:
    """Write named per-cell channels (tensor entries) to one file."""
    names = list(channels)
    blocks = []
    for name in names:
        arr = np.asarray(channels[name], dtype=np.float64)
        if arr.shape != grid.shape:
            raise ValueError(f"channel {name!r} has shape {arr.shape}, want {grid.shape}")
        blocks.append(arr.ravel(order="C").astype("<f8").tobytes())
    count = grid.size * len(names)
    Path(path).write_bytes(_header(grid, count, names) + b"".join(blocks))


def read_channels(path) -> tuple[Grid, dict[str, np.ndarray]]:
    """Read named channels written by :func:`write_channels`."""
    head, grid, data = _parse(path)
    names = head.get("channels")
    if names is None:
        raise ValueError("file holds a single field; use read_field")
    per = grid.size
    out = {}
    for i, name in enumerate(names):
        out[name] = data[i * per : (i + 1) * per].reshape(grid.shape).copy()
    return grid, out
