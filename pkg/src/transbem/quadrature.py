"""Quadrature on triangles and on pairs of triangles.

Triangle rules are given in barycentric coordinates with weights summing
to one, so that ``area * sum(w * f(x))`` integrates over a physical
triangle.  Pair rules for triangles that share vertices use the
Sauter--Schwab regularizing transformations on the reference element
``{0 <= x2 <= x1 <= 1}``; their weights sum to ``1/4`` (the squared
reference area) and integrate over a physical pair after scaling by
``(2 A_a) (2 A_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, sqrt

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

IDENTICAL = "identical"
EDGE = "edge-adjacent"
VERTEX = "vertex-adjacent"
DISJOINT = "disjoint"

SUPPORTED_ORDERS = tuple(range(1, 21))


class QuadratureError(RuntimeError):
    """Non-finite kernel value met during integration."""


@dataclass(frozen=True)
class TriangleRule:
    order: int
    points: np.ndarray  # (n, 3) barycentric
    weights: np.ndarray  # (n,), sum 1

    def __len__(self):
        return len(self.weights)

    def physical(self, vertices) -> np.ndarray:
        """Map the rule to a triangle given as a (3, 3) vertex array."""
        return self.points @ np.asarray(vertices, dtype=float)


def _collapsed_rule(order: int):
    m = max(1, ceil((order + 1) / 2))
    # Jacobi weight (1 - s) absorbs the Duffy Jacobian of the collapse
    xs, ws = roots_jacobi(m, 1.0, 0.0)
    xg, wg = roots_legendre(m)
    s = (xs + 1) / 2
    t = (xg + 1) / 2
    ws = ws / 4.0
    wg = wg / 2.0
    u = np.repeat(s, m)
    v = np.tile(t, m) * (1 - u)
    w = np.repeat(ws, m) * np.tile(wg, m)
    bary = np.stack([1 - u - v, u, v], axis=1)
    return bary, 2.0 * w


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> TriangleRule:
    """Symmetric or collapsed Gauss rule exact for total degree ``order``."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported triangle rule order {order}; supported 1..20")
    if order == 1:
        bary = np.array([[1 / 3, 1 / 3, 1 / 3]])
        w = np.array([1.0])
    elif order == 2:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif order == 5:
        r = sqrt(15.0)
        a1, a2 = (6 - r) / 21, (6 + r) / 21
        w1, w2 = (155 - r) / 1200, (155 + r) / 1200
        bary = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [1 - 2 * a1, a1, a1], [a1, 1 - 2 * a1, a1], [a1, a1, 1 - 2 * a1],
            [1 - 2 * a2, a2, a2], [a2, 1 - 2 * a2, a2], [a2, a2, 1 - 2 * a2],
        ])
        w = np.array([9 / 40, w1, w1, w1, w2, w2, w2])
    else:
        bary, w = _collapsed_rule(order)
    bary.setflags(write=False)
    w.setflags(write=False)
    return TriangleRule(order, bary, w)


# ----------------------------------------------------------------------------- Sauter--Schwab

def _ref_to_bary(x1, x2):
    # chi(x1, x2) = P0 + x1 (P1 - P0) + x2 (P2 - P1)
    return np.stack([1 - x1, x1 - x2, x2], axis=-1)


def _coincident_regions(xi, e1, e2, e3):
    jac = xi**3 * e1**2 * e2
    regions = [
        ((xi, xi * (1 - e1 + e1 * e2)), (xi * (1 - e1 * e2 * e3), xi * (1 - e1))),
        ((xi * (1 - e1 * e2 * e3), xi * (1 - e1)), (xi, xi * (1 - e1 + e1 * e2))),
        ((xi, xi * e1 * (1 - e2 + e2 * e3)), (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
        ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * (1 - e2 + e2 * e3))),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * (1 - e2))),
        ((xi, xi * e1 * (1 - e2)), (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3))),
    ]
    return [(x, y, jac) for x, y in regions]


def _edge_regions(xi, e1, e2, e3):
    base = xi**3 * e1**2
    return [
        ((xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), base),
        ((xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), base * e2),
        ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3), base * e2),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1), base * e2),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2), base * e2),
    ]


def _vertex_regions(xi, e1, e2, e3):
    jac = xi**3 * e2
    return [
        ((xi, xi * e1), (xi * e2, xi * e2 * e3), jac),
        ((xi * e2, xi * e2 * e3), (xi, xi * e1), jac),
    ]


@dataclass(frozen=True)
class SingularPairRule:
    """Tensor Gauss rule after the Sauter--Schwab change of variables.

    ``x_bary`` and ``y_bary`` refer to vertex orderings in which shared
    vertices come first and in the same order on both triangles.
    """

    case: str
    order: int
    x_bary: np.ndarray
    y_bary: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def singular_rule(case: str, order: int = 4) -> SingularPairRule:
    """Pair rule for ``case`` with ``order`` Gauss--Legendre points per axis."""
    if order < 1:
        raise ValueError("order must be >= 1")
    g, gw = roots_legendre(order)
    g = (g + 1) / 2
    gw = gw / 2
    grid = np.meshgrid(g, g, g, g, indexing="ij")
    wgrid = np.meshgrid(gw, gw, gw, gw, indexing="ij")
    xi, e1, e2, e3 = (a.ravel() for a in grid)
    w4 = np.prod([a.ravel() for a in wgrid], axis=0)
    builder = {IDENTICAL: _coincident_regions, EDGE: _edge_regions, VERTEX: _vertex_regions}.get(case)
    if builder is None:
        raise ValueError(f"no singular rule for case {case!r}")
    xs, ys, ws = [], [], []
    for (x1, x2), (y1, y2), jac in builder(xi, e1, e2, e3):
        xs.append(_ref_to_bary(x1, x2))
        ys.append(_ref_to_bary(y1, y2))
        ws.append(w4 * jac)
    rule = SingularPairRule(case, order, np.concatenate(xs), np.concatenate(ys), np.concatenate(ws))
    for arr in (rule.x_bary, rule.y_bary, rule.weights):
        arr.setflags(write=False)
    return rule


# ----------------------------------------------------------------------------- pair integration

def _shared(tri_a, tri_b):
    pairs = []
    for i in range(3):
        for j in range(3):
            if np.array_equal(tri_a[i], tri_b[j]):
                pairs.append((i, j))
    return pairs


def pair_case(tri_a, tri_b) -> str:
    """Classify two triangles, given as (3, 3) vertex arrays, by shared vertices."""
    n = len(_shared(np.asarray(tri_a), np.asarray(tri_b)))
    return {3: IDENTICAL, 2: EDGE, 1: VERTEX}.get(n, DISJOINT)


def shared_orderings(shared_pairs):
    """Vertex permutations putting shared vertices first, in matching order."""
    ia = [i for i, _ in shared_pairs]
    ib = [j for _, j in shared_pairs]
    perm_a = ia + [i for i in range(3) if i not in ia]
    perm_b = ib + [j for j in range(3) if j not in ib]
    return perm_a, perm_b


def triangle_diameter(tri) -> float:
    tri = np.asarray(tri, dtype=float)
    return float(max(np.linalg.norm(tri[i] - tri[j]) for i in range(3) for j in range(i)))


def is_near(tri_a, tri_b, factor: float = 0.3) -> bool:
    """Conservative proximity test used to raise the regular Gauss order."""
    ca, cb = tri_a.mean(0), tri_b.mean(0)
    ra = np.linalg.norm(tri_a - ca, axis=1).max()
    rb = np.linalg.norm(tri_b - cb, axis=1).max()
    dist = np.linalg.norm(ca - cb) - ra - rb
    return dist < factor * max(triangle_diameter(tri_a), triangle_diameter(tri_b))


def _area2(tri):
    return float(np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])))


def integrate_pair(kernel, tri_a, tri_b, regular_order: int = 5, singular_order: int = 4) -> complex:
    """Estimate ``int_A int_B kernel(x, y) dy dx``.

    ``kernel`` is vectorized over rows of (N, 3) point arrays.  Pairs
    sharing vertices use Sauter--Schwab rules; disjoint pairs use tensor
    Gauss, with the order doubled for nearby pairs.
    """
    tri_a = np.asarray(tri_a, dtype=float)
    tri_b = np.asarray(tri_b, dtype=float)
    shared = _shared(tri_a, tri_b)
    scale = _area2(tri_a) * _area2(tri_b)
    if shared:
        case = {3: IDENTICAL, 2: EDGE, 1: VERTEX}[len(shared)]
        perm_a, perm_b = shared_orderings(shared)
        rule = singular_rule(case, singular_order)
        x = rule.x_bary @ tri_a[perm_a]
        y = rule.y_bary @ tri_b[perm_b]
        w = rule.weights * scale
    else:
        order = regular_order
        if is_near(tri_a, tri_b):
            order = min(2 * regular_order, max(SUPPORTED_ORDERS))
        rule = gauss_rule(order)
        xa = rule.physical(tri_a)
        yb = rule.physical(tri_b)
        n = len(rule)
        x = np.repeat(xa, n, axis=0)
        y = np.tile(yb, (n, 1))
        w = np.outer(rule.weights, rule.weights).ravel() * scale / 4.0
    values = np.asarray(kernel(x, y))
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        raise QuadratureError(f"quadrature blow-up at x={x[i].tolist()}, y={y[i].tolist()}")
    return complex(np.dot(w, values))
