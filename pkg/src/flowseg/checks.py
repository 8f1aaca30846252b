"""Verification harnesses for the message-passing layers.

Two kinds of evidence:

* a spatial-permutation probe showing the anisotropic layer separates two
  nodes whose neighbor feature multisets are identical but arranged
  differently, while the isotropic baseline provably cannot
* finite-difference Jacobian checks comparing each forward's hand-derived
  directional derivative against central differences
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .getconv import (
    IsoParams,
    LayerParams,
    diffusivity,
    diffusivity_jvp,
    getblock_forward,
    getblock_forward_jvp,
    getconv_forward,
    getconv_forward_jvp,
    isotropic_attention_forward,
    isotropic_attention_forward_jvp,
    random_iso_params,
    random_layer_params,
)
from .grid import GridShape, NeighborhoodSpec, grid_adjacency, nid, square

JACOBIAN_OPS = ("diffusivity", "getconv", "getblock", "isotropic")


@dataclass
class ProbeReport:
    anisotropic_gap: float
    isotropic_gap: float


def isomorphism_probe(
    seed: int,
    channels: int = 4,
    u: np.ndarray | None = None,
    v: np.ndarray | None = None,
) -> ProbeReport:
    """Compare both layers on two nodes with permuted but equal neighborhoods.

    On a 3x7 grid with the 3x3 stencil, node A at (1, 1) sees feature u on its
    left and v on its right; node B at (1, 5) sees v on its left and u on its
    right. Every other feature (including A's and B's own) is zero, so the
    neighbor feature multisets of A and B are identical and differ only in
    spatial arrangement. Both layers run with parameters drawn from ``seed``;
    the report carries the max-abs output difference between A and B for each.

    The isotropic gap is exactly 0.0 by construction (its aggregate at A and B
    is the same two-term sum, commuted); the anisotropic gap is generically
    positive whenever u != v.
    """
    rng = np.random.default_rng(seed)
    shape = GridShape(3, 7)
    spec = square(3)
    adj = grid_adjacency(shape, spec)
    if u is None:
        u = rng.normal(size=channels)
    if v is None:
        v = rng.normal(size=channels)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    feats = np.zeros((shape.n_nodes, channels))
    node_a = nid((1, 1), shape)
    node_b = nid((1, 5), shape)
    feats[nid((1, 0), shape)] = u
    feats[nid((1, 2), shape)] = v
    feats[nid((1, 4), shape)] = v
    feats[nid((1, 6), shape)] = u

    aniso = getconv_forward(feats, adj, random_layer_params(rng, channels, adj.n_slots))
    iso = isotropic_attention_forward(feats, adj, random_iso_params(rng, channels))
    return ProbeReport(
        anisotropic_gap=float(np.abs(aniso[node_a] - aniso[node_b]).max()),
        isotropic_gap=float(np.abs(iso[node_a] - iso[node_b]).max()),
    )


@dataclass
class CheckPoint:
    """A differentiation point: one forward, its input, and a direction."""

    op: str
    shape: GridShape
    spec: NeighborhoodSpec
    x: np.ndarray
    tangent: np.ndarray
    params: LayerParams | IsoParams | None = None


@dataclass
class JacobianReport:
    op: str
    max_rel_err: float
    tol: float
    passed: bool


def random_check_point(op: str, seed: int, channels: int = 4) -> CheckPoint:
    """Seeded random input/direction for one of the differentiable forwards."""
    rng = np.random.default_rng(seed)
    spec = square(3)
    if op == "diffusivity":
        shape = GridShape(4, 4)
        adj = grid_adjacency(shape, spec)
        x = 0.5 * rng.normal(size=(shape.n_nodes, adj.n_slots))
        params = None
    elif op == "getconv":
        shape = GridShape(4, 4)
        adj = grid_adjacency(shape, spec)
        x = 0.5 * rng.normal(size=(shape.n_nodes, channels))
        params = random_layer_params(rng, channels, adj.n_slots)
    elif op == "getblock":
        shape = GridShape(8, 8)
        adj = grid_adjacency(shape, spec)
        x = 0.5 * rng.normal(size=(shape.h, shape.w, channels))
        params = random_layer_params(rng, channels, adj.n_slots, kernel=3)
    elif op == "isotropic":
        shape = GridShape(4, 4)
        x = 0.5 * rng.normal(size=(shape.n_nodes, channels))
        params = random_iso_params(rng, channels)
    else:
        raise ValueError(f"unknown op {op!r}; choose from {JACOBIAN_OPS}")
    return CheckPoint(op, shape, spec, x, rng.normal(size=x.shape), params)


def _evaluate(point: CheckPoint, x: np.ndarray) -> np.ndarray:
    adj = grid_adjacency(point.shape, point.spec)
    if point.op == "diffusivity":
        return diffusivity(x, adj)
    if point.op == "getconv":
        return getconv_forward(x, adj, point.params)
    if point.op == "getblock":
        return getblock_forward(x, point.spec, point.params)
    if point.op == "isotropic":
        return isotropic_attention_forward(x, adj, point.params)
    raise ValueError(f"unknown op {point.op!r}")


def _analytic_jvp(point: CheckPoint) -> np.ndarray:
    adj = grid_adjacency(point.shape, point.spec)
    if point.op == "diffusivity":
        return diffusivity_jvp(point.x, point.tangent, adj)[1]
    if point.op == "getconv":
        return getconv_forward_jvp(point.x, point.tangent, adj, point.params)[1]
    if point.op == "getblock":
        return getblock_forward_jvp(point.x, point.tangent, point.spec, point.params)[1]
    if point.op == "isotropic":
        return isotropic_attention_forward_jvp(point.x, point.tangent, adj, point.params)[1]
    raise ValueError(f"unknown op {point.op!r}")


def jacobian_check(
    point: CheckPoint, tol: float = 1e-4, step: float = 1e-5
) -> JacobianReport:
    """Analytic JVP versus central finite differences along ``point.tangent``.

    The relative error is the max-abs discrepancy normalized by the larger of
    the two JVPs' max-abs values (floored at 1e-12 so an exactly-zero pair,
    e.g. inside the exponent clamp, passes with error 0).
    """
    analytic = _analytic_jvp(point)
    plus = _evaluate(point, point.x + step * point.tangent)
    minus = _evaluate(point, point.x - step * point.tangent)
    fd = (plus - minus) / (2.0 * step)
    if not (np.all(np.isfinite(fd)) and np.all(np.isfinite(analytic))):
        return JacobianReport(point.op, float("inf"), tol, False)
    num = float(np.abs(analytic - fd).max())
    den = max(float(np.abs(analytic).max()), float(np.abs(fd).max()), 1e-12)
    err = num / den
    return JacobianReport(point.op, err, tol, err < tol)
