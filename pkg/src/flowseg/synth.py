"""Deterministic synthetic label maps for tests, demos, and the CLI."""

from __future__ import annotations

import re

import numpy as np

FIXTURES = (
    "two-squares-separated",
    "two-blobs-adherent",
    "concave-horseshoe",
    "grid-of-k-instances",
    "random-voronoi",
)

_GRID_RE = re.compile(r"^grid-of-(\d+)-instances$")


def _require(shape: tuple[int, int], minimum: int) -> tuple[int, int]:
    h, w = shape
    if h < minimum or w < minimum:
        raise ValueError(f"fixture needs at least {minimum}x{minimum}, got {h}x{w}")
    return h, w


def _two_squares_separated(shape):
    h, w = _require(shape, 12)
    labels = np.zeros((h, w), dtype=np.int64)
    side = max(3, min(h, w) // 3)
    labels[1 : 1 + side, 1 : 1 + side] = 1
    labels[h - 1 - side : h - 1, w - 1 - side : w - 1] = 2
    return labels


def _two_blobs_adherent(shape):
    # one disk split down the middle: two instances sharing a vertical edge
    h, w = _require(shape, 12)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    radius = min(h, w) // 2 - 1
    rr, cc = np.mgrid[0:h, 0:w]
    inside = (rr - cy) ** 2 + (cc - cx) ** 2 <= radius**2
    labels = np.zeros((h, w), dtype=np.int64)
    labels[inside & (cc <= cx)] = 1
    labels[inside & (cc > cx)] = 2
    return labels


def _concave_horseshoe(shape):
    # upward-open U: two vertical arms joined by a bottom bar
    h, w = _require(shape, 16)
    margin = max(2, min(h, w) // 8)
    thick = max(4, min(h, w) // 5)
    r0, r1 = margin, h - margin
    c0, c1 = margin, w - margin
    labels = np.zeros((h, w), dtype=np.int64)
    labels[r0:r1, c0 : c0 + thick] = 1
    labels[r0:r1, c1 - thick : c1] = 1
    labels[r1 - thick : r1, c0:c1] = 1
    return labels


def _grid_of_instances(shape, k):
    if k < 1:
        raise ValueError("instance count must be >= 1")
    h, w = shape
    side = int(np.ceil(np.sqrt(k)))
    if h < 3 * side or w < 3 * side:
        raise ValueError(f"{h}x{w} too small for {k} tiled instances")
    row_edges = np.linspace(0, h, side + 1).astype(int)
    col_edges = np.linspace(0, w, side + 1).astype(int)
    labels = np.zeros((h, w), dtype=np.int64)
    next_id = 1
    for bi in range(side):
        for bj in range(side):
            if next_id > k:
                break
            labels[row_edges[bi] : row_edges[bi + 1], col_edges[bj] : col_edges[bj + 1]] = next_id
            next_id += 1
    return labels


def _random_voronoi(shape, seed):
    h, w = _require(shape, 16)
    rng = np.random.default_rng(seed)
    k = max(2, (h * w) // 600)
    min_dist = 0.4 * min(h, w)
    sites: list[tuple[int, int]] = []
    while len(sites) < k:
        cand = (int(rng.integers(0, h)), int(rng.integers(0, w)))
        if all((cand[0] - r) ** 2 + (cand[1] - c) ** 2 >= min_dist**2 for r, c in sites):
            sites.append(cand)
        else:
            min_dist *= 0.97  # relax until k well-separated sites fit
    rr, cc = np.mgrid[0:h, 0:w]
    dist2 = np.stack(
        [(rr - r) ** 2 + (cc - c) ** 2 for r, c in sites], axis=0
    )
    return (dist2.argmin(axis=0) + 1).astype(np.int64)


def synth(name: str, shape: tuple[int, int], seed: int = 0) -> np.ndarray:
    """Deterministic (h, w) label map for a named fixture.

    Known names: two-squares-separated, two-blobs-adherent, concave-horseshoe,
    grid-of-<k>-instances, random-voronoi. Only the voronoi fixture uses the
    seed; the geometric ones depend on the shape alone.
    """
    if name == "two-squares-separated":
        return _two_squares_separated(shape)
    if name == "two-blobs-adherent":
        return _two_blobs_adherent(shape)
    if name == "concave-horseshoe":
        return _concave_horseshoe(shape)
    if name == "random-voronoi":
        return _random_voronoi(shape, seed)
    m = _GRID_RE.match(name)
    if m:
        return _grid_of_instances(shape, int(m.group(1)))
    raise ValueError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
