"""Displacement-driven clustering on pixel grids.

The pipeline: build a transmit graph whose single out-edge per node follows
the displacement vector, contract messages along it so instance boundaries
drain to zero, label 8-connected components of the surviving messages, then
propagate those seed labels back out along the reversed edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridAdjacency, GridShape


@dataclass
class TransmitGraph:
    """One out-edge per node (``target``) plus a per-node message (``mes``)."""

    shape: GridShape
    target: np.ndarray
    mes: np.ndarray


@dataclass
class ReverseGraph:
    """Edge-reversed transmit graph.

    Node i's unique in-edge arrives from ``source[i]`` (its out-edge target in
    the original graph), so one message-passing round is ``mes <- mes[source]``.
    """

    shape: GridShape
    source: np.ndarray
    mes: np.ndarray


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def build_tg(field: np.ndarray, energy: np.ndarray) -> TransmitGraph:
    """Transmit graph of a displacement field, messages initialized to the energy.

    Each node gets one out-edge to the pixel at its own position plus its
    displacement vector, with both coordinates rounded half away from zero and
    clamped into the grid. A zero vector yields a self-loop.
    """
    f = np.asarray(field, dtype=np.float64)
    e = np.asarray(energy)
    if f.ndim != 3 or f.shape[2] != 2:
        raise ValueError(f"field must be (h, w, 2), got {f.shape}")
    if e.shape != f.shape[:2]:
        raise ValueError(f"energy shape {e.shape} does not match field {f.shape[:2]}")
    if not np.all(np.isfinite(f)):
        raise ValueError("displacement field must be finite")
    shape = GridShape(*e.shape)
    rows, cols = np.divmod(np.arange(shape.n_nodes, dtype=np.int64), shape.w)
    tr = _round_half_away(rows + f[..., 0].ravel())
    tc = _round_half_away(cols + f[..., 1].ravel())
    tr = np.clip(tr, 0, shape.h - 1).astype(np.int64)
    tc = np.clip(tc, 0, shape.w - 1).astype(np.int64)
    return TransmitGraph(shape, tr * shape.w + tc, e.ravel().copy())


def contract(tg: TransmitGraph, t0: int = 2) -> TransmitGraph:
    """``t0`` rounds of simultaneous message accumulation along the out-edges.

    Each round, a node's message becomes the sum of the messages of the nodes
    pointing to it (zero for in-degree 0). Every node forwards to exactly one
    target, so the total message is conserved; integer messages stay integer.
    """
    if t0 < 0:
        raise ValueError("t0 must be >= 0")
    mes = tg.mes.copy()
    for _ in range(t0):
        new = np.zeros_like(mes)
        np.add.at(new, tg.target, mes)
        mes = new
    return TransmitGraph(tg.shape, tg.target.copy(), mes)


class _DisjointSet:
    __slots__ = ("parent",)

    def __init__(self) -> None:
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def connected_components(mes: np.ndarray, shape: GridShape) -> np.ndarray:
    """8-connected components of the nonzero support of a per-node scalar.

    Returns an (h, w) map with id 0 where the message is zero and component
    ids 1..k assigned in raster order of each component's first pixel.
    """
    h, w = shape.h, shape.w
    fg = (np.asarray(mes).reshape(h, w) != 0).tolist()
    prov = [[-1] * w for _ in range(h)]
    ds = _DisjointSet()
    for r in range(h):
        fg_r, prov_r = fg[r], prov[r]
        prov_up = prov[r - 1] if r > 0 else None
        for c in range(w):
            if not fg_r[c]:
                continue
            best = -1
            if prov_up is not None:
                for cc in (c - 1, c, c + 1):
                    if 0 <= cc < w and prov_up[cc] >= 0:
                        if best < 0:
                            best = prov_up[cc]
                        else:
                            ds.union(best, prov_up[cc])
            if c > 0 and prov_r[c - 1] >= 0:
                if best < 0:
                    best = prov_r[c - 1]
                else:
                    ds.union(best, prov_r[c - 1])
            if best < 0:
                best = ds.make()
            prov_r[c] = best

    out = np.zeros((h, w), dtype=np.int64)
    remap: dict[int, int] = {}
    for r in range(h):
        prov_r = prov[r]
        for c in range(w):
            p = prov_r[c]
            if p < 0:
                continue
            root = ds.find(p)
            label = remap.get(root)
            if label is None:
                label = len(remap) + 1
                remap[root] = label
            out[r, c] = label
    return out


def reverse(g: TransmitGraph | ReverseGraph) -> ReverseGraph | TransmitGraph:
    """Flip the direction of every edge; an involution."""
    if isinstance(g, TransmitGraph):
        return ReverseGraph(g.shape, g.target.copy(), g.mes.copy())
    return TransmitGraph(g.shape, g.source.copy(), g.mes.copy())


def recover(rg: ReverseGraph, ins: np.ndarray, t1: int = 8) -> np.ndarray:
    """Propagate seed labels outward along the reversed edges.

    Starts from the messages ``ins`` and runs ``t1`` rounds of the same
    accumulation as :func:`contract` on the reverse graph; since every node
    has exactly one in-edge there, each round reduces to adopting the label
    of the node its original out-edge points to. Returns the final (h, w)
    label map.
    """
    if t1 < 0:
        raise ValueError("t1 must be >= 0")
    ins = np.asarray(ins)
    if ins.shape != (rg.shape.h, rg.shape.w):
        raise ValueError(f"instance map shape {ins.shape} != grid {rg.shape}")
    mes = ins.ravel().copy()
    for _ in range(t1):
        mes = mes[rg.source]
    return mes.reshape(rg.shape.h, rg.shape.w)


def gcm(field: np.ndarray, energy: np.ndarray, t0: int = 2, t1: int = 8) -> np.ndarray:
    """Recover an instance map from a displacement field and an energy map.

    Composition of :func:`build_tg`, :func:`contract` (``t0`` rounds),
    :func:`connected_components`, :func:`reverse`, and :func:`recover`
    (``t1`` rounds); pixels with zero energy are forced to id 0 at the end,
    so the energy map always bounds the recovered foreground.
    """
    tg = build_tg(field, energy)
    seeds = connected_components(contract(tg, t0).mes, tg.shape)
    ids = recover(reverse(tg), seeds, t1)
    return np.where(np.asarray(energy) == 0, 0, ids)


def cluster_for_masking(
    field: np.ndarray, patch: int = 4, t0: int = 2, t1: int = 8
) -> np.ndarray:
    """Cluster ids on the patch-downsampled grid, with unit initial messages.

    The field is averaged over non-overlapping ``patch x patch`` blocks and
    divided by ``patch`` so the vectors are expressed in feature-grid pixel
    units, then clustered with energy identically 1; with ``t1 >= t0`` every
    node ends up with a nonzero cluster id. Requires both grid sides to be
    divisible by ``patch``.
    """
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 3 or f.shape[2] != 2:
        raise ValueError(f"field must be (h, w, 2), got {f.shape}")
    h, w = f.shape[:2]
    if patch < 1 or h % patch or w % patch:
        raise ValueError(f"grid {h}x{w} not divisible into {patch}x{patch} patches")
    ds = f.reshape(h // patch, patch, w // patch, patch, 2).mean(axis=(1, 3)) / patch
    ones = np.ones((h // patch, w // patch), dtype=np.int64)
    return gcm(ds, ones, t0, t1)


def mask_diffusivity(
    diffusivity: np.ndarray, cluster_ids: np.ndarray, adj: GridAdjacency
) -> np.ndarray:
    """Zero edge weights between nodes of different clusters; idempotent."""
    s = np.asarray(diffusivity, dtype=np.float64)
    if s.shape != (adj.shape.n_nodes, adj.n_slots):
        raise ValueError(f"diffusivity must be {(adj.shape.n_nodes, adj.n_slots)}, got {s.shape}")
    cls = np.asarray(cluster_ids).ravel()
    if cls.shape[0] != adj.shape.n_nodes:
        raise ValueError("cluster ids must cover all nodes")
    nb_cls = np.where(adj.valid, cls[adj.nbr_safe], -1)
    keep = adj.valid & (nb_cls == cls[:, None])
    return np.where(keep, s, 0.0)
