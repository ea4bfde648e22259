"""Layer potentials of RWG densities, far fields, and closed-form dipole fields.

For densities ``(M, J)`` on a surface the represented field is::

    P_k(M, J)   = curl S M + S J + k^-2 grad S div J
    curl P_k    = k^2 S M + grad S div M + curl S J

where ``S u(x) = int Phi_k(x, y) u(y) ds_y``.  Inside a domain a Maxwell
field is reproduced by ``P_k`` of its traces ``(E x nu, curl E x nu)``;
outside, a radiating field equals ``-P_k`` of its traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..quadrature import gauss_rule

FOUR_PI = 4.0 * np.pi
_CHUNK = 256


@dataclass
class DensitySamples:
    """RWG density sampled at quadrature points (area folded into ``w``)."""

    y: np.ndarray  # (Q, 3)
    w: np.ndarray  # (Q,)
    value: np.ndarray  # (Q, 3) complex
    div: np.ndarray  # (Q,) complex


def sample_density(space, coeffs, order: int = 10) -> DensitySamples:
    mesh = space.mesh
    coeffs = np.asarray(coeffs, dtype=complex)
    rule = gauss_rule(order)
    verts = mesh.vertices[mesh.triangles]  # (F, 3, 3)
    pts = np.einsum("qi,fic->fqc", rule.points, verts)
    w = mesh.areas[:, None] * rule.weights[None, :]
    edges = mesh.triangle_edges
    coef = mesh.triangle_edge_signs * space.edge_lengths[edges] / (2.0 * mesh.areas[:, None])
    c = coeffs[edges] * coef  # (F, 3)
    # sum_i c_i (y - v_i) = (sum_i c_i) y - sum_i c_i v_i
    val = c.sum(axis=1)[:, None, None] * pts - np.einsum("fi,fic->fc", c, verts)[:, None, :]
    div = 2.0 * c.sum(axis=1)
    nq = len(rule.weights)
    return DensitySamples(
        pts.reshape(-1, 3), w.ravel(), val.reshape(-1, 3), np.repeat(div, nq)
    )


def _kernel_terms(k, x, y):
    d = x[:, None, :] - y[None, :, :]
    r = np.linalg.norm(d, axis=2)
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    g = ((1j * k - 1.0 / r) * phi / r)[:, :, None] * d  # grad_x Phi
    return phi, g


def fields(k, points, m: DensitySamples | None = None, j: DensitySamples | None = None):
    """``(P_k(M, J), curl P_k(M, J))`` at the given points."""
    k = complex(k)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    e_out = np.zeros(points.shape, dtype=complex)
    h_out = np.zeros(points.shape, dtype=complex)
    for lo in range(0, len(points), _CHUNK):
        x = points[lo:lo + _CHUNK]
        if m is not None:
            phi, g = _kernel_terms(k, x, m.y)
            wv = m.value * m.w[:, None]
            e_out[lo:lo + len(x)] += np.cross(g, wv[None, :, :]).sum(axis=1)
            h_out[lo:lo + len(x)] += k * k * (phi @ wv)
            h_out[lo:lo + len(x)] += np.einsum("pqc,q->pc", g, m.div * m.w)
        if j is not None:
            phi, g = _kernel_terms(k, x, j.y)
            wv = j.value * j.w[:, None]
            e_out[lo:lo + len(x)] += phi @ wv
            e_out[lo:lo + len(x)] += np.einsum("pqc,q->pc", g, j.div * j.w) / (k * k)
            h_out[lo:lo + len(x)] += np.cross(g, wv[None, :, :]).sum(axis=1)
    return e_out, h_out


def split_coefficients(space, vec):
    e = space.dimension
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (2 * e,):
        raise ValueError(f"expected a vector of length {2 * e}, got {vec.shape}")
    return vec[:e], vec[e:]


def represented_fields(k, space, vec, points, order: int = 10):
    """Fields ``P_k(M, J)`` and ``curl P_k(M, J)`` for a stacked ``(M, J)``."""
    mc, jc = split_coefficients(space, vec)
    return fields(k, points, sample_density(space, mc, order), sample_density(space, jc, order))


def far_field(vec, k, space, directions, order: int = 5) -> np.ndarray:
    """Far-field pattern of ``P_k(M, J)`` in the given unit directions.

    ``E_inf(d) = (1/4 pi) [ i k d x M^(d) + d x (J^(d) x d) ]`` with
    ``F^(d) = int F(y) exp(-i k d.y) ds_y``; the gradient term is normal
    to ``d`` and drops out of the projection.
    """
    k = complex(k)
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    norms = np.linalg.norm(d, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("directions must be unit vectors")
    mc, jc = split_coefficients(space, vec)
    ms, js = sample_density(space, mc, order), sample_density(space, jc, order)
    phase_m = np.exp(-1j * k * (d @ ms.y.T)) * ms.w[None, :]
    phase_j = np.exp(-1j * k * (d @ js.y.T)) * js.w[None, :]
    mh = phase_m @ ms.value
    jh = phase_j @ js.value
    tang = jh - d * np.einsum("pc,pc->p", d, jh)[:, None]
    return (1j * k * np.cross(d, mh) + tang) / FOUR_PI


def fibonacci_directions(count: int = 64) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(1.0 - z * z)
    t = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.column_stack([rho * np.cos(t), rho * np.sin(t), z])


# ----------------------------------------------------------------------------- dipoles

def dipole_fields(k, source, moment, points):
    """Electric dipole ``E = curl curl (p Phi_k(., x0))`` and its curl.

    ``E = k^2 p Phi + grad(p . grad Phi)`` and ``curl E = k^2 grad Phi x p``.
    """
    k = complex(k)
    x = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(moment, dtype=complex)
    d = x - np.asarray(source, dtype=float)[None, :]
    r = np.linalg.norm(d, axis=1)
    rh = d / r[:, None]
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    f1 = (1j * k - 1.0 / r) / r  # grad Phi = f1 Phi d
    # second derivatives: d_a d_b Phi = Phi [A delta_ab + B rh_a rh_b]
    a = (1j * k * r - 1.0) / (r * r)
    b = (3.0 - 3j * k * r - (k * r) ** 2) / (r * r)
    prh = rh @ p
    e = k * k * phi[:, None] * p + phi[:, None] * (a[:, None] * p + b[:, None] * prh[:, None] * rh)
    grad = (f1 * phi)[:, None] * d
    h = k * k * np.cross(grad, p[None, :])
    return e, h


def rwg_interpolant(space, field_fn) -> np.ndarray:
    """RWG coefficients from edge-normal fluxes of a field at edge midpoints.

    The normal points out of the plus triangle, where the basis function
    flows across the edge with unit normal component.
    """
    mesh = space.mesh
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    mid = 0.5 * (a + b)
    plus = mesh.edge_triangles[:, 0]
    tangent = (b - a) / np.linalg.norm(b - a, axis=1)[:, None]
    nrm = np.cross(tangent, mesh.normals[plus])
    # orient away from the plus triangle's centroid
    away = mid - mesh.centroids[plus]
    nrm *= np.sign(np.einsum("ec,ec->e", nrm, away))[:, None]
    vals = np.asarray(field_fn(mid))
    return np.einsum("ec,ec->e", vals, nrm)


def tangential_trace_tests(space, field_values_fn, order: int = 10) -> np.ndarray:
    """Galerkin right-hand side ``int phi_i . F ds`` for a field function."""
    mesh = space.mesh
    rule = gauss_rule(order)
    verts = mesh.vertices[mesh.triangles]
    pts = np.einsum("qi,fic->fqc", rule.points, verts)
    w = mesh.areas[:, None] * rule.weights[None, :]
    f = np.asarray(field_values_fn(pts.reshape(-1, 3))).reshape(pts.shape)
    edges = mesh.triangle_edges
    coef = mesh.triangle_edge_signs * space.edge_lengths[edges] / (2.0 * mesh.areas[:, None])
    out = np.zeros(space.dimension, dtype=complex)
    for i in range(3):
        rel = pts - verts[:, i][:, None, :]
        val = np.einsum("fqc,fqc,fq->f", rel, f, w) * coef[:, i]
        np.add.at(out, edges[:, i], val)
    return out
