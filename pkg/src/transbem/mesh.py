"""Closed triangulated surfaces: readers, generators, topology and validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised when a surface fails to parse or violates a mesh invariant."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """A closed, outward-oriented triangulated surface.

    Edges are numbered by the lexicographic order of their sorted vertex
    pairs ``(min, max)``.  For edge ``e`` the "plus" triangle is the one
    that traverses it as ``min -> max``; the RWG function of ``e`` flows
    out of the plus triangle into the minus triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(repr=False)
    edge_triangles: np.ndarray = field(repr=False)
    triangle_edges: np.ndarray = field(repr=False)
    triangle_edge_signs: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    @cached_property
    def n_components(self) -> int:
        return _count_components(self.n_triangles, self.edge_triangles)

    @property
    def genus(self) -> int:
        return (2 * self.n_components - self.euler_characteristic) // 2

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @property
    def volume(self) -> float:
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.triangles, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def summary(self) -> dict:
        return {
            "V": self.n_vertices,
            "E": self.n_edges,
            "F": self.n_triangles,
            "genus": self.genus,
            "area": self.area,
            "volume": self.volume,
            "min_edge_length": float(self.edge_lengths.min()),
            "max_edge_length": self.max_edge_length,
            "hash": self.content_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _count_components(n_tri: int, edge_triangles: np.ndarray) -> int:
    parent = np.arange(n_tri)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edge_triangles:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_tri)})


def build_mesh(vertices, triangles) -> SurfaceMesh:
    """Build topology for a triangle soup and validate every invariant.

    Raises
    ------
    MeshError
        Open or non-manifold edges, inconsistent or inward orientation,
        degenerate triangles.  The message names the offending index.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must have shape (V, 3)")
    if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
        raise MeshError("triangles must have shape (F, 3) with F > 0")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        bad = int(np.nonzero((triangles < 0).any(1) | (triangles >= len(vertices)).any(1))[0][0])
        raise MeshError(f"triangle {bad} references a missing vertex")

    p = vertices[triangles]
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    twice_area = np.linalg.norm(cross, axis=1)
    scale = max(float(np.ptp(vertices, axis=0).max()), 1e-300)
    degenerate = np.nonzero(twice_area <= 1e-14 * scale**2)[0]
    if len(degenerate):
        raise MeshError(f"triangle {int(degenerate[0])} is degenerate (zero area)")

    n_tri = len(triangles)
    # local edge i is opposite local vertex i: (v[i+1], v[i+2])
    a = triangles[:, [1, 2, 0]].ravel()
    b = triangles[:, [2, 0, 1]].ravel()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key = lo * len(vertices) + hi
    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    if (counts == 1).any():
        e = int(np.nonzero(counts == 1)[0][0])
        raise MeshError(
            f"edge with one adjacent triangle: edge {e} "
            f"(vertices {uniq[e] // len(vertices)}-{uniq[e] % len(vertices)}); surface is not closed"
        )
    if (counts > 2).any():
        e = int(np.nonzero(counts > 2)[0][0])
        raise MeshError(f"edge {e} has {counts[e]} adjacent triangles; surface is not manifold")

    edges = np.stack([uniq // len(vertices), uniq % len(vertices)], axis=1)
    tri_edges = inverse.reshape(n_tri, 3)
    forward = (a < b).reshape(n_tri, 3)
    signs = np.where(forward, 1, -1).astype(np.int64)

    n_edges = len(edges)
    plus = np.full(n_edges, -1, dtype=np.int64)
    minus = np.full(n_edges, -1, dtype=np.int64)
    flat_tri = np.repeat(np.arange(n_tri), 3)
    flat_edge = tri_edges.ravel()
    flat_fwd = forward.ravel()
    for t, e, f in zip(flat_tri, flat_edge, flat_fwd):
        if f:
            if plus[e] >= 0:
                raise MeshError(f"edge {e} is traversed in the same direction by triangles "
                                f"{plus[e]} and {t}; inconsistent orientation")
            plus[e] = t
        else:
            if minus[e] >= 0:
                raise MeshError(f"edge {e} is traversed in the same direction by triangles "
                                f"{minus[e]} and {t}; inconsistent orientation")
            minus[e] = t

    normals = cross / twice_area[:, None]
    mesh = SurfaceMesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_triangles=np.stack([plus, minus], axis=1),
        triangle_edges=tri_edges,
        triangle_edge_signs=signs,
        normals=normals,
        areas=0.5 * twice_area,
    )
    if mesh.volume <= 0:
        raise MeshError("negative signed volume: triangles are oriented inward")
    if mesh.genus < 0 or (2 * mesh.n_components - mesh.euler_characteristic) % 2:
        raise MeshError(f"invalid Euler characteristic {mesh.euler_characteristic}")
    for arr in (mesh.vertices, mesh.triangles, mesh.edges, mesh.edge_triangles,
                mesh.triangle_edges, mesh.triangle_edge_signs, mesh.normals, mesh.areas):
        arr.setflags(write=False)
    return mesh


# ----------------------------------------------------------------------------- readers

def _content_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text: str):
    lines = list(_content_lines(text))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshError("parse error: missing OFF header")
    head = lines[0][3:].split()
    pos = 1
    if not head:
        head = lines[1].split()
        pos = 2
    try:
        nv, nf = int(head[0]), int(head[1])
        vertices = np.array([[float(x) for x in lines[pos + i].split()[:3]] for i in range(nv)])
        faces = []
        for j in range(nf):
            parts = lines[pos + nv + j].split()
            count = int(parts[0])
            if count != 3:
                raise MeshError(f"parse error: face {j} has {count} vertices; only triangles are supported")
            faces.append([int(x) for x in parts[1:4]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"parse error: malformed OFF body ({exc})") from None
    return vertices.reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _parse_gmsh2(text: str):
    lines = [ln.strip() for ln in text.splitlines()]

    def section(name):
        try:
            start = lines.index(f"${name}")
            stop = lines.index(f"$End{name}", start)
        except ValueError:
            raise MeshError(f"parse error: missing ${name} section") from None
        return lines[start + 1:stop]

    fmt = section("MeshFormat")
    if not fmt or not fmt[0].split()[0].startswith("2"):
        raise MeshError("parse error: only Gmsh ASCII format version 2 is supported")
    if fmt[0].split()[1] != "0":
        raise MeshError("parse error: binary Gmsh files are not supported")
    try:
        nodes = section("Nodes")
        n_nodes = int(nodes[0])
        ids = {}
        vertices = np.empty((n_nodes, 3))
        for i, line in enumerate(nodes[1:n_nodes + 1]):
            parts = line.split()
            ids[int(parts[0])] = i
            vertices[i] = [float(x) for x in parts[1:4]]
        elements = section("Elements")
        n_el = int(elements[0])
        faces = []
        for line in elements[1:n_el + 1]:
            parts = [int(x) for x in line.split()]
            etype, ntags = parts[1], parts[2]
            conn = parts[3 + ntags:]
            if etype == 2:
                faces.append([ids[c] for c in conn[:3]])
            elif etype in (3, 9, 10, 16):
                raise MeshError(f"parse error: element {parts[0]} of type {etype} is not a linear triangle")
    except (IndexError, ValueError, KeyError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"parse error: malformed Gmsh body ({exc!r})") from None
    return vertices, np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format: str | None = None) -> SurfaceMesh:
    """Read an OFF or Gmsh ASCII v2 surface and validate it.

    ``format`` is ``"off"`` or ``"gmsh-ascii-v2"``; when omitted it is
    inferred from the suffix (``.off`` / ``.msh``).
    """
    path = Path(path)
    if format is None:
        format = {".off": "off", ".msh": "gmsh-ascii-v2"}.get(path.suffix.lower())
        if format is None:
            raise MeshError(f"cannot infer mesh format from {path.name!r}")
    text = path.read_text()
    if format == "off":
        v, f = _parse_off(text)
    elif format in ("gmsh-ascii-v2", "gmsh", "msh"):
        v, f = _parse_gmsh2(text)
    else:
        raise MeshError(f"unsupported mesh format {format!r}")
    return build_mesh(v, f)


def write_off(mesh_or_vertices, triangles=None, path=None) -> str:
    """Serialize to OFF; returns the text and writes it when ``path`` is given."""
    if triangles is None:
        vertices, triangles = mesh_or_vertices.vertices, mesh_or_vertices.triangles
    else:
        vertices = mesh_or_vertices
    out = ["OFF", f"{len(vertices)} {len(triangles)} 0"]
    out += [" ".join(repr(float(c)) for c in v) for v in vertices]
    out += [f"3 {a} {b} {c}" for a, b, c in triangles]
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ----------------------------------------------------------------------------- generators

def _icosahedron():
    phi = (1.0 + 5.0**0.5) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def make_icosphere(radius: float = 1.0, level: int = 0, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Subdivided icosahedron with all vertices on the sphere."""
    if not radius > 0:
        raise MeshError("radius must be positive")
    if level < 0:
        raise MeshError("level must be >= 0")
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new, dtype=np.int64)
    v = np.asarray(verts) * radius + np.asarray(center, dtype=float)
    return build_mesh(v, faces)


# ----------------------------------------------------------------------------- two-surface scene

@dataclass(frozen=True, eq=False)
class MultiSurfaceScene:
    """Outer surface ``outer`` enclosing a disjoint inner surface ``inner``."""

    outer: SurfaceMesh
    inner: SurfaceMesh
    gap: float


def _segment_distance(p, a, b):
    ab = b - a
    t = np.einsum("...i,...i", p - a, ab) / np.einsum("...i,...i", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def point_triangle_distance(points, a, b, c) -> np.ndarray:
    """Exact Euclidean distance from each point to each triangle.

    ``points`` is (P, 3); ``a``, ``b``, ``c`` are (T, 3).  Returns (P, T).
    The plane projection is used when it falls inside the triangle,
    otherwise the nearest of the three edges.
    """
    p = np.asarray(points, dtype=float)[:, None, :]
    a, b, c = (np.asarray(x, dtype=float)[None] for x in (a, b, c))
    n = np.cross(b - a, c - a)
    nn = np.einsum("...i,...i", n, n)
    h = np.einsum("...i,...i", p - a, n) / nn
    q = p - h[..., None] * n
    # signed sub-areas of the projection decide inside/outside
    inside = (
        (np.einsum("...i,...i", np.cross(b - a, q - a), n) >= 0)
        & (np.einsum("...i,...i", np.cross(c - b, q - b), n) >= 0)
        & (np.einsum("...i,...i", np.cross(a - c, q - c), n) >= 0)
    )
    edge = np.minimum(np.minimum(_segment_distance(p, a, b), _segment_distance(p, b, c)),
                      _segment_distance(p, c, a))
    return np.where(inside, np.abs(h) * np.sqrt(nn), edge)


def surface_gap(first: SurfaceMesh, second: SurfaceMesh, chunk: int = 256) -> float:
    """Minimum vertex-to-triangle distance, taken in both directions."""
    best = np.inf
    for src, dst in ((first, second), (second, first)):
        tri = dst.vertices[dst.triangles]
        for s in range(0, src.n_vertices, chunk):
            d = point_triangle_distance(src.vertices[s:s + chunk], tri[:, 0], tri[:, 1], tri[:, 2])
            best = min(best, float(d.min()))
    return best


def points_inside(mesh: SurfaceMesh, points, seed: int = 20240611, max_redraw: int = 8) -> np.ndarray:
    """Ray-crossing parity test; rays with grazing hits are re-drawn."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tri = mesh.vertices[mesh.triangles]
    v0, e1, e2 = tri[:, 0], tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    rng = np.random.default_rng(seed)
    inside = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        for _ in range(max_redraw):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            h = np.cross(d, e2)
            det = np.einsum("ij,ij->i", e1, h)
            if (np.abs(det) < 1e-12).any():
                ok_det = np.abs(det) >= 1e-12
            else:
                ok_det = np.ones(len(det), dtype=bool)
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / det
                s = p - v0
                u = inv * np.einsum("ij,ij->i", s, h)
                q = np.cross(s, e1)
                v = inv * (q @ d)
                t = inv * np.einsum("ij,ij->i", e2, q)
            eps = 1e-9
            hit = ok_det & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t > eps)
            grazing = hit & ((u < eps) | (v < eps) | (u + v > 1 - eps))
            parallel_hit = (~ok_det) & (np.abs(det) > 0)
            if grazing.any() or parallel_hit.any():
                continue
            inside[i] = bool(hit.sum() % 2)
            break
        else:
            raise MeshError(f"containment test failed for point {i}: persistent grazing rays")
    return inside


def make_scene(outer: SurfaceMesh, inner: SurfaceMesh) -> MultiSurfaceScene:
    """Pair an outer surface with an inner surface strictly inside it."""
    gap = surface_gap(outer, inner)
    if gap <= 1e-12:
        raise MeshError("surfaces intersect or touch")
    inside = points_inside(outer, inner.vertices)
    if not inside.all():
        raise MeshError(f"inner not contained: inner vertex {int(np.nonzero(~inside)[0][0])} lies outside")
    return MultiSurfaceScene(outer=outer, inner=inner, gap=gap)
