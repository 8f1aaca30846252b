"""Discrete diffusion on grid graphs and ground-truth displacement synthesis."""

from __future__ import annotations

import numpy as np

from .grid import GridAdjacency, GridShape, disk, grid_adjacency


def diffusion_step(
    feats: np.ndarray,
    diffusivity: np.ndarray,
    tau: float,
    adj: GridAdjacency,
) -> np.ndarray:
    """One Jacobi diffusion update ``z <- (1 - tau) * z + tau * sum_j s_ij z_j``.

    feats: (N, C) node features, read as a frozen snapshot (simultaneous
        update; the result never mixes old and new values).
    diffusivity: (N, n_slots) edge weights aligned with ``adj``'s stencil
        slots; entries on out-of-grid slots are ignored.
    tau: step size in [0, 1].

    Each node's weights must either sum to 1 (tolerance 1e-6) or satisfy
    ``tau * sum <= 1``; negative weights are rejected.
    """
    z = np.asarray(feats, dtype=np.float64)
    s = np.asarray(diffusivity, dtype=np.float64)
    n = adj.shape.n_nodes
    if z.ndim != 2 or z.shape[0] != n:
        raise ValueError(f"features must be (N, C) with N={n}, got {z.shape}")
    if s.shape != (n, adj.n_slots):
        raise ValueError(f"diffusivity must be {(n, adj.n_slots)}, got {s.shape}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if np.any(s < 0):
        raise ValueError("diffusivity must be non-negative")
    s = np.where(adj.valid, s, 0.0)
    sums = s.sum(axis=1)
    ok = (np.abs(sums - 1.0) <= 1e-6) | (tau * sums <= 1.0 + 1e-12)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise ValueError(
            f"node {bad}: neighborhood diffusivity sums to {sums[bad]}, "
            "expected 1 (tol 1e-6) or tau * sum <= 1"
        )
    acc = np.zeros_like(z)
    for c in range(adj.n_slots):
        acc += s[:, c, None] * z[adj.nbr_safe[:, c]]
    return (1.0 - tau) * z + tau * acc


def gt_displacement(labels: np.ndarray, radius: int = 5, iters: int = 96) -> np.ndarray:
    """Displacement field pulling every labeled pixel toward its instance interior.

    Starting from each pixel's own (row, col) coordinates, every pixel with a
    positive label repeatedly has its coordinate replaced by the mean of its
    same-label disk neighbors' coordinates (center excluded, simultaneous
    update, ``iters`` rounds over a disk of ``radius``). The returned field is
    final minus initial coordinates, shaped (h, w, 2) with the row component
    in plane 0. Background pixels and pixels with no same-label neighbor keep
    the zero vector.

    Accumulation is in float64 with a fixed slot order, so results are
    deterministic and independent of any parallelism in numpy.
    """
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {lab.shape}")
    if not np.issubdtype(lab.dtype, np.integer):
        raise ValueError(f"label map must be integer, got dtype {lab.dtype}")
    if lab.size and lab.min() < 0:
        raise ValueError("labels must be >= 0")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if iters < 0:
        raise ValueError("iters must be >= 0")

    shape = GridShape(*lab.shape)
    adj = grid_adjacency(shape, disk(radius))
    flat = lab.ravel()
    nb_label = np.where(adj.valid, flat[adj.nbr_safe], -1)
    same = (nb_label == flat[:, None]) & (flat[:, None] > 0)
    count = same.sum(axis=1).astype(np.float64)
    movable = count > 0

    rows, cols = np.divmod(np.arange(shape.n_nodes, dtype=np.int64), shape.w)
    start = np.stack([rows, cols], axis=1).astype(np.float64)
    coords = start.copy()
    denom = np.maximum(count, 1.0)[:, None]
    for _ in range(iters):
        acc = np.zeros_like(coords)
        for c in range(adj.n_slots):
            acc += same[:, c, None] * coords[adj.nbr_safe[:, c]]
        coords = np.where(movable[:, None], acc / denom, coords)
    return (coords - start).reshape(shape.h, shape.w, 2)
