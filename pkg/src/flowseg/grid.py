"""Pixel-grid graphs: node ids, stencil neighborhoods, adjacency tables.

Conventions shared by the whole package:

* node ids are row-major, ``id = row * w + col``
* stencil offsets are enumerated in raster order (ascending row offset,
  then ascending column offset) with the center excluded; the position of
  an offset in that enumeration is its slot index ``c``, which is the same
  for every node (boundary clipping skips offsets but never renumbers)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class GridShape:
    """Height and width of a pixel grid; the nodes are its h*w pixels."""

    h: int
    w: int

    def __post_init__(self) -> None:
        if self.h < 1 or self.w < 1:
            raise ValueError(f"grid sides must be >= 1, got {self.h}x{self.w}")

    @property
    def n_nodes(self) -> int:
        return self.h * self.w


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Stencil descriptor: square of odd side ``size`` or disk of radius ``size``.

    The center offset (0, 0) is never part of the stencil.
    """

    kind: str
    size: int

    def __post_init__(self) -> None:
        if self.kind not in ("square", "disk"):
            raise ValueError(f"unknown stencil kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("stencil size must be >= 1")
        if self.kind == "square" and self.size % 2 == 0:
            raise ValueError("square stencils need an odd side length")


def square(side: int) -> NeighborhoodSpec:
    return NeighborhoodSpec("square", side)


def disk(radius: int) -> NeighborhoodSpec:
    return NeighborhoodSpec("disk", radius)


def nid(coord: tuple[int, int], shape: GridShape) -> int:
    """Row-major node id of a pixel coordinate; raises on out-of-grid input."""
    row, col = coord
    if not (0 <= row < shape.h and 0 <= col < shape.w):
        raise ValueError(f"coordinate {(row, col)} outside {shape.h}x{shape.w} grid")
    return row * shape.w + col


def coord_of(node: int, shape: GridShape) -> tuple[int, int]:
    """Inverse of :func:`nid`."""
    if not (0 <= node < shape.n_nodes):
        raise ValueError(f"node id {node} outside [0, {shape.n_nodes})")
    return divmod(node, shape.w)


@lru_cache(maxsize=None)
def stencil_offsets(spec: NeighborhoodSpec) -> tuple[tuple[int, int], ...]:
    """All stencil offsets in raster order, center excluded.

    Square of side k keeps max(|dr|, |dc|) <= (k-1)/2; disk of radius r keeps
    dr^2 + dc^2 <= r^2. The length of the result is the slot count n.
    """
    if spec.kind == "square":
        half = (spec.size - 1) // 2
        reach, keep = half, lambda dr, dc: True
    else:
        reach = spec.size
        keep = lambda dr, dc: dr * dr + dc * dc <= spec.size * spec.size
    return tuple(
        (dr, dc)
        for dr in range(-reach, reach + 1)
        for dc in range(-reach, reach + 1)
        if (dr, dc) != (0, 0) and keep(dr, dc)
    )


@lru_cache(maxsize=None)
def reciprocal_slots(spec: NeighborhoodSpec) -> np.ndarray:
    """``recip[c]`` is the slot of the opposite offset ``-offsets[c]``.

    Square and disk stencils are point symmetric, so this always exists (and
    equals n-1-c under raster ordering).
    """
    offs = stencil_offsets(spec)
    index = {off: c for c, off in enumerate(offs)}
    recip = np.array([index[(-dr, -dc)] for dr, dc in offs], dtype=np.int64)
    recip.setflags(write=False)
    return recip


def neighbors(node: int, spec: NeighborhoodSpec, shape: GridShape) -> list[tuple[int, int]]:
    """In-grid neighbors of a node as ``(slot index c, neighbor id)`` pairs.

    Out-of-grid offsets are skipped; the surviving pairs keep the slot index
    the offset has in :func:`stencil_offsets`.
    """
    row, col = coord_of(node, shape)
    out = []
    for c, (dr, dc) in enumerate(stencil_offsets(spec)):
        rr, cc = row + dr, col + dc
        if 0 <= rr < shape.h and 0 <= cc < shape.w:
            out.append((c, rr * shape.w + cc))
    return out


@dataclass(frozen=True)
class GridAdjacency:
    """Vectorized stencil adjacency for one (shape, spec) pair.

    ``nbr[i, c]`` is the id of node i's neighbor at slot c, or -1 when that
    offset leaves the grid; ``nbr_safe`` replaces -1 by 0 so it can be used
    for gathers (mask with ``valid``). For j = nbr[i, c] it holds that
    ``nbr[j, recip[c]] == i``.
    """

    shape: GridShape
    spec: NeighborhoodSpec
    nbr: np.ndarray
    nbr_safe: np.ndarray
    valid: np.ndarray
    recip: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.nbr.shape[1]


@lru_cache(maxsize=32)
def grid_adjacency(shape: GridShape, spec: NeighborhoodSpec) -> GridAdjacency:
    offs = np.array(stencil_offsets(spec), dtype=np.int64).reshape(-1, 2)
    rows, cols = np.divmod(np.arange(shape.n_nodes, dtype=np.int64), shape.w)
    rr = rows[:, None] + offs[None, :, 0]
    cc = cols[:, None] + offs[None, :, 1]
    valid = (rr >= 0) & (rr < shape.h) & (cc >= 0) & (cc < shape.w)
    nbr = np.where(valid, rr * shape.w + cc, -1)
    nbr_safe = np.where(valid, nbr, 0)
    for arr in (nbr, nbr_safe, valid):
        arr.setflags(write=False)
    return GridAdjacency(shape, spec, nbr, nbr_safe, valid, reciprocal_slots(spec))
