"""Object-level segmentation metrics.

An "object" is the pixel set of one positive id in an instance map (id 0 is
background). Conventions, declared once and used by every metric:

* detection (obj_f1): a predicted object is a true positive iff it overlaps
  some not-yet-claimed ground-truth object by strictly more than 50% of that
  object's area; predictions are processed in raster order of their first
  pixel and claim the candidate with the largest overlap (raster tie-break)
* pairing (obj_dice / obj_hd): each object pairs with the counterpart of
  largest pixel overlap (raster tie-break); contributions are weighted by the
  object's share of its map's total foreground area and the two directional
  sums are averaged
* an object with no overlapping counterpart contributes Dice 0; for the
  Hausdorff sum it instead pairs with the counterpart minimizing the symmetric
  boundary Hausdorff distance, and if the other map has no objects at all the
  metric is the image diagonal ``hypot(h-1, w-1)``
* boundary pixels are foreground pixels with at least one 4-neighbor outside
  their object (out-of-grid counts as outside); distances are Euclidean
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist


@dataclass
class _ObjectSet:
    ids: np.ndarray        # original ids, raster order of first pixel
    index: np.ndarray      # (h, w) dense object index, -1 on background
    areas: np.ndarray      # pixel count per object

    @property
    def count(self) -> int:
        return len(self.ids)


def _extract(m: np.ndarray) -> _ObjectSet:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"instance map must be 2-D, got shape {a.shape}")
    flat = a.ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    fg = uniq > 0
    order = np.argsort(first[fg], kind="stable")
    rank = np.full(len(uniq), -1, dtype=np.int64)
    rank[np.flatnonzero(fg)[order]] = np.arange(order.size)
    index = rank[inverse].reshape(a.shape)
    areas = np.bincount(index.ravel()[index.ravel() >= 0], minlength=order.size)
    return _ObjectSet(ids=uniq[fg][order], index=index, areas=areas)


def _overlap_matrix(gt: _ObjectSet, pred: _ObjectSet) -> np.ndarray:
    both = (gt.index.ravel() >= 0) & (pred.index.ravel() >= 0)
    if not both.any() or gt.count == 0 or pred.count == 0:
        return np.zeros((gt.count, pred.count), dtype=np.int64)
    keys = gt.index.ravel()[both] * pred.count + pred.index.ravel()[both]
    counts = np.bincount(keys, minlength=gt.count * pred.count)
    return counts.reshape(gt.count, pred.count)


@dataclass
class MatchReport:
    """Detection bookkeeping under the strict-majority overlap rule."""

    tp: int
    fp: int
    fn: int
    gt_ids: list[int]
    pred_ids: list[int]
    matched_pred: list[int | None]          # per GT object, raster order
    overlaps: np.ndarray = field(repr=False)  # (n_gt, n_pred) pixel counts
    gt_areas: np.ndarray = field(repr=False)
    pred_areas: np.ndarray = field(repr=False)


def match_objects(pred: np.ndarray, gt: np.ndarray) -> MatchReport:
    g, p = _extract(gt), _extract(pred)
    if g.index.shape != p.index.shape:
        raise ValueError("prediction and ground truth shapes differ")
    overlap = _overlap_matrix(g, p)
    claimed = np.zeros(g.count, dtype=bool)
    matched_pred: list[int | None] = [None] * g.count
    tp = 0
    for j in range(p.count):
        best = -1
        best_area = 0
        for i in range(g.count):
            if claimed[i]:
                continue
            if overlap[i, j] * 2 > g.areas[i] and overlap[i, j] > best_area:
                best, best_area = i, overlap[i, j]
        if best >= 0:
            claimed[best] = True
            matched_pred[best] = int(p.ids[j])
            tp += 1
    return MatchReport(
        tp=tp,
        fp=p.count - tp,
        fn=int((~claimed).sum()),
        gt_ids=[int(i) for i in g.ids],
        pred_ids=[int(i) for i in p.ids],
        matched_pred=matched_pred,
        overlaps=overlap,
        gt_areas=g.areas,
        pred_areas=p.areas,
    )


def obj_f1(pred: np.ndarray, gt: np.ndarray) -> float:
    """Object detection F1 under the strict-majority overlap rule; two maps
    with no objects at all agree vacuously (1.0)."""
    rep = match_objects(pred, gt)
    if not rep.gt_ids and not rep.pred_ids:
        return 1.0
    return 2.0 * rep.tp / (2.0 * rep.tp + rep.fp + rep.fn)


def _best_counterparts(overlap: np.ndarray, axis: int) -> np.ndarray:
    """Index of the max-overlap counterpart per row (axis=1) or column
    (axis=0); -1 where there is no overlap. Ties go to the earlier object."""
    if overlap.size == 0:
        n = overlap.shape[0] if axis == 1 else overlap.shape[1]
        return np.full(n, -1, dtype=np.int64)
    best = overlap.argmax(axis=axis)
    hit = overlap.max(axis=axis) > 0
    return np.where(hit, best, -1)


def obj_dice(pred: np.ndarray, gt: np.ndarray) -> float:
    """Area-weighted symmetric object Dice; unmatched objects contribute 0."""
    g, p = _extract(gt), _extract(pred)
    if g.index.shape != p.index.shape:
        raise ValueError("prediction and ground truth shapes differ")
    if g.count == 0 and p.count == 0:
        return 1.0
    if g.count == 0 or p.count == 0:
        return 0.0
    overlap = _overlap_matrix(g, p)
    gt_total = g.areas.sum()
    pred_total = p.areas.sum()

    def one_side(areas, other_areas, ov, total):
        best = _best_counterparts(ov, axis=1)
        acc = 0.0
        for i in range(len(areas)):
            j = best[i]
            if j < 0:
                continue
            acc += (areas[i] / total) * 2.0 * ov[i, j] / (areas[i] + other_areas[j])
        return acc

    return float(
        0.5
        * (
            one_side(g.areas, p.areas, overlap, gt_total)
            + one_side(p.areas, g.areas, overlap.T, pred_total)
        )
    )


def _boundary_points(index: np.ndarray, k: int) -> np.ndarray:
    """(m, 2) coordinates of object k's boundary pixels (4-neighbor rule)."""
    mask = index == k
    up = np.zeros_like(mask)
    up[1:, :] = mask[:-1, :]
    down = np.zeros_like(mask)
    down[:-1, :] = mask[1:, :]
    left = np.zeros_like(mask)
    left[:, 1:] = mask[:, :-1]
    right = np.zeros_like(mask)
    right[:, :-1] = mask[:, 1:]
    boundary = mask & ~(up & down & left & right)
    return np.argwhere(boundary).astype(np.float64)


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d = cdist(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def obj_hd(pred: np.ndarray, gt: np.ndarray) -> float:
    """Area-weighted symmetric object Hausdorff distance over boundary pixels.

    Objects pair by largest overlap; an object with no overlapping counterpart
    pairs with the counterpart of minimal symmetric Hausdorff distance. Both
    maps empty of objects gives 0.0; exactly one empty gives the image
    diagonal.
    """
    g, p = _extract(gt), _extract(pred)
    if g.index.shape != p.index.shape:
        raise ValueError("prediction and ground truth shapes differ")
    if g.count == 0 and p.count == 0:
        return 0.0
    h, w = g.index.shape
    if g.count == 0 or p.count == 0:
        return float(np.hypot(h - 1, w - 1))
    overlap = _overlap_matrix(g, p)
    gt_pts = [_boundary_points(g.index, i) for i in range(g.count)]
    pred_pts = [_boundary_points(p.index, j) for j in range(p.count)]
    cache: dict[tuple[int, int], float] = {}

    def hd(i, j):
        key = (i, j)
        if key not in cache:
            cache[key] = _hausdorff(gt_pts[i], pred_pts[j])
        return cache[key]

    def one_side(n_self, areas, total, ov, pair_hd, n_other):
        acc = 0.0
        best = _best_counterparts(ov, axis=1)
        for i in range(n_self):
            j = best[i]
            if j < 0:
                j = min(range(n_other), key=lambda jj: pair_hd(i, jj))
            acc += (areas[i] / total) * pair_hd(i, j)
        return acc

    gt_side = one_side(g.count, g.areas, g.areas.sum(), overlap, hd, p.count)
    pred_side = one_side(
        p.count, p.areas, p.areas.sum(), overlap.T, lambda j, i: hd(i, j), g.count
    )
    return float(0.5 * (gt_side + pred_side))


def evaluate(pred: np.ndarray, gt: np.ndarray) -> dict:
    """All three metrics plus per-object detection records.

    Keys: ``obj_f1``, ``obj_dice``, ``obj_hd``, and ``per_object``: one record
    per ground-truth object in raster order with ``gt_id``, ``pred_id`` (the
    detection match, or null), ``gt_area``, and ``overlap`` (pixels shared
    with that match).
    """
    rep = match_objects(pred, gt)
    per_object = []
    for i, gid in enumerate(rep.gt_ids):
        pid = rep.matched_pred[i]
        if pid is None:
            shared = 0
        else:
            j = rep.pred_ids.index(pid)
            shared = int(rep.overlaps[i, j])
        per_object.append(
            {
                "gt_id": gid,
                "pred_id": pid,
                "gt_area": int(rep.gt_areas[i]),
                "overlap": shared,
            }
        )
    return {
        "obj_f1": obj_f1(pred, gt),
        "obj_dice": obj_dice(pred, gt),
        "obj_hd": obj_hd(pred, gt),
        "per_object": per_object,
    }
