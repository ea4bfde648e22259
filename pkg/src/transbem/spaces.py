"""Lowest-order div-conforming (RWG) space and its loop-star splitting.

Degrees of freedom are mesh edges, numbered as the sorted ``(min, max)``
vertex pairs of :class:`~transbem.mesh.SurfaceMesh`.  On a support
triangle ``t`` with local edge ``i`` opposite vertex ``v_i``::

    phi(x) = s * L / (2 A) * (x - v_i),     div phi = s * L / A

where ``s = +1`` on the triangle that traverses the edge from its lower
to its higher vertex index and ``s = -1`` on the other one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .mesh import SurfaceMesh


class SpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DivConformingSpace:
    mesh: SurfaceMesh
    edge_lengths: np.ndarray = field(repr=False)
    # integer F x E incidence: s on the support triangles, zero elsewhere
    div_incidence: sparse.csr_matrix = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.mesh.n_edges

    @property
    def divergence_matrix(self) -> sparse.csr_matrix:
        """F x E matrix of piecewise-constant divergences ``s L / A``."""
        inv_area = sparse.diags(1.0 / self.mesh.areas)
        return (inv_area @ self.div_incidence @ sparse.diags(self.edge_lengths)).tocsr()

    def local_data(self, dof: int):
        """Yield ``(triangle, sign, opposite_vertex_coords)`` for the two supports."""
        m = self.mesh
        for t in m.edge_triangles[dof]:
            loc = int(np.nonzero(m.triangle_edges[t] == dof)[0][0])
            yield int(t), int(m.triangle_edge_signs[t, loc]), m.vertices[m.triangles[t, loc]]

    def evaluate(self, dof: int, triangle: int, bary) -> np.ndarray:
        """Value of basis function ``dof`` at a barycentric point of ``triangle``."""
        bary = np.asarray(bary, dtype=float)
        if (
            triangle not in self.mesh.edge_triangles[dof]
            or bary.shape != (3,)
            or bary.min() < -1e-12
            or abs(bary.sum() - 1.0) > 1e-12
        ):
            raise SpaceError(f"point outside support of basis function {dof}")
        for t, s, opp in self.local_data(dof):
            if t == triangle:
                x = bary @ self.mesh.vertices[self.mesh.triangles[t]]
                return s * self.edge_lengths[dof] / (2.0 * self.mesh.areas[t]) * (x - opp)
        raise AssertionError("unreachable")

    def divergence(self, dof: int, triangle: int) -> float:
        m = self.mesh
        row = m.triangle_edges[triangle]
        hit = np.nonzero(row == dof)[0]
        if len(hit) == 0:
            return 0.0
        s = m.triangle_edge_signs[triangle, hit[0]]
        return float(s * self.edge_lengths[dof] / m.areas[triangle])


def build_space(mesh: SurfaceMesh) -> DivConformingSpace:
    n_tri = mesh.n_triangles
    rows = np.repeat(np.arange(n_tri), 3)
    inc = sparse.csr_matrix(
        (mesh.triangle_edge_signs.ravel(), (rows, mesh.triangle_edges.ravel())),
        shape=(n_tri, mesh.n_edges),
        dtype=np.int64,
    )
    lengths = mesh.edge_lengths.copy()
    lengths.setflags(write=False)
    return DivConformingSpace(mesh, lengths, inc)


@dataclass(frozen=True, eq=False)
class LoopStarSplit:
    """Change of basis ``[loop | star]`` in RWG coefficients.

    ``loop_flux`` holds integer edge fluxes; the RWG coefficients of a
    loop are ``flux / L``.  Star columns are unit vectors on the edges
    left out of a spanning tree of the vertex-edge graph.
    """

    space: DivConformingSpace
    loop_flux: sparse.csc_matrix = field(repr=False)
    star_edges: np.ndarray = field(repr=False)

    @property
    def n_loop(self) -> int:
        return self.loop_flux.shape[1]

    @property
    def n_star(self) -> int:
        return len(self.star_edges)

    def flux_matrix(self) -> np.ndarray:
        """Columns of edge fluxes (coefficient times edge length)."""
        e = self.space.dimension
        star = np.zeros((e, self.n_star))
        star[self.star_edges, np.arange(self.n_star)] = self.space.edge_lengths[self.star_edges]
        return np.hstack([self.loop_flux.toarray().astype(float), star])

    def matrix(self) -> np.ndarray:
        """E x E matrix whose columns are RWG coefficient vectors."""
        return self.flux_matrix() / self.space.edge_lengths[:, None]

    def divergence_of_columns(self) -> np.ndarray:
        """Triangle divergences of every column; loop columns are exactly 0."""
        sp = self.space
        num = sp.div_incidence @ self.flux_matrix()
        return num / sp.mesh.areas[:, None]

    def loop_divergence_numerators(self) -> np.ndarray:
        """Integer incidence sums for the loop columns (all zero)."""
        return (self.space.div_incidence @ self.loop_flux).toarray()


def build_loop_star(space: DivConformingSpace) -> LoopStarSplit:
    mesh = space.mesh
    if mesh.genus > 0:
        raise SpaceError(f"unsupported genus {mesh.genus}: loop-star split needs genus 0")
    n_v, n_e = mesh.n_vertices, mesh.n_edges
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    erange = np.arange(n_e)
    # flux of the loop around v through edge (a, b): +1 if v = a, -1 if v = b
    grad = sparse.csc_matrix(
        (np.concatenate([np.ones(n_e), -np.ones(n_e)]).astype(np.int64),
         (np.concatenate([erange, erange]), np.concatenate([a, b]))),
        shape=(n_e, n_v),
    )
    graph = sparse.csr_matrix((np.ones(n_e), (a, b)), shape=(n_v, n_v))
    graph = graph + graph.T
    n_comp, labels = connected_components(graph, directed=False)
    keep = np.ones(n_v, dtype=bool)
    tree = np.zeros(n_e, dtype=bool)
    edge_id = {(int(i), int(j)): e for e, (i, j) in enumerate(mesh.edges)}
    for c in range(n_comp):
        root = int(np.nonzero(labels == c)[0][0])
        keep[root] = False
        order, pred = breadth_first_order(graph, root, directed=False)
        for v in order[1:]:
            p = int(pred[v])
            tree[edge_id[(min(p, int(v)), max(p, int(v)))]] = True
    loop_flux = grad[:, np.nonzero(keep)[0]]
    star = np.nonzero(~tree)[0]
    star.setflags(write=False)
    return LoopStarSplit(space, loop_flux.tocsc(), star)


def gram_matrices(space: DivConformingSpace):
    """Sparse ``G_ij = int phi_i . phi_j`` and ``R_ij = int phi_i . (nu x phi_j)``.

    The integrands are quadratic on each triangle, so the edge-midpoint
    rule is exact.  ``G`` is symmetric positive definite, ``R`` skew.
    """
    m = space.mesh
    verts = m.vertices[m.triangles]  # (F, 3, 3)
    mids = 0.5 * (verts[:, [1, 2, 0]] + verts[:, [2, 0, 1]])  # (F, 3 points, 3)
    coef = m.triangle_edge_signs * space.edge_lengths[m.triangle_edges] / (2.0 * m.areas[:, None])
    # values[f, q, i] = phi of local edge i at midpoint q
    vals = coef[:, None, :, None] * (mids[:, :, None, :] - verts[:, None, :, :])
    rot = np.cross(m.normals[:, None, None, :], vals)
    w = m.areas[:, None, None] / 3.0
    g_loc = np.einsum("fqic,fqjc->fij", vals, vals) * w
    r_loc = np.einsum("fqic,fqjc->fij", vals, rot) * w
    rows = np.repeat(m.triangle_edges, 3, axis=1).ravel()
    cols = np.tile(m.triangle_edges, (1, 3)).ravel()
    e = space.dimension
    g = sparse.csr_matrix((g_loc.ravel(), (rows, cols)), shape=(e, e))
    r = sparse.csr_matrix((r_loc.ravel(), (rows, cols)), shape=(e, e))
    return g, r
