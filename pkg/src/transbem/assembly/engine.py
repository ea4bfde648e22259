"""Tiled, deterministic driver around the compiled pair loops.

Test triangles are cut into fixed-size tiles.  Tiles may be computed by
any number of worker threads, but their contributions are scattered in
tile order on the calling thread, so every matrix entry is summed in the
same sequence regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..quadrature import QuadratureError
from . import _core
from .geometry import QuadratureOrders, singular_tables, surface_arrays

TILE = 32
WORKERS_ENV = "TRANSBEM_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@dataclass
class RawBlocks:
    """Galerkin pieces of one pass; absent pieces are ``None``.

    ``vs``/``ws``: vector and scalar single layer with ``Phi_ka``;
    ``vd``/``wd``: the same with ``Phi_k1 - Phi_k``; ``ks``/``kd``: the
    curl operator with ``grad Phi_ka`` and with the difference kernel.
    Scalar pieces are triangle-by-triangle (piecewise-constant basis).
    """

    vs: np.ndarray | None = None
    ws: np.ndarray | None = None
    vd: np.ndarray | None = None
    wd: np.ndarray | None = None
    ks: np.ndarray | None = None
    kd: np.ndarray | None = None


def compute_blocks(test_space, trial_space, *, ka=1.0, k=1.0, k1=1.0,
                   single=False, diff_scalar=False, grad_single=False, grad_diff=False,
                   orders: QuadratureOrders | None = None, workers: int | None = None,
                   same_surface: bool | None = None) -> RawBlocks:
    orders = orders or QuadratureOrders()
    workers = workers or default_workers()
    if same_surface is None:
        same_surface = test_space is trial_space or test_space.mesh is trial_space.mesh
    flags = np.array([single, diff_scalar, grad_single, grad_diff], dtype=np.bool_)
    a = surface_arrays(test_space, orders)
    b = surface_arrays(trial_space, orders)
    ss = singular_tables(orders.singular)
    na, nb = len(a.area), len(b.area)
    ea, eb = test_space.dimension, trial_space.dimension

    def alloc(flag, shape):
        return np.zeros(shape, dtype=np.complex128) if flag else np.zeros((1, 1), np.complex128)

    vs, ws = alloc(single, (ea, eb)), alloc(single, (na, nb))
    vd, wd = alloc(diff_scalar, (ea, eb)), alloc(diff_scalar, (na, nb))
    ks, kd = alloc(grad_single, (ea, eb)), alloc(grad_diff, (ea, eb))
    ka, k, k1 = complex(ka), complex(k), complex(k1)

    def work(lo):
        hi = min(lo + TILE, na)
        return lo, _core.pair_moments_tile(
            lo, hi, *a.kernel_args(), *b.kernel_args(), bool(same_surface), flags,
            ka, k, k1, float(orders.near_factor), *ss,
        )

    starts = list(range(0, na, TILE))
    if workers == 1:
        results = map(work, starts)
        pool = None
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(work, starts)
    try:
        for lo, mom in results:
            if not np.all(np.isfinite(mom)):
                bad = np.argwhere(~np.isfinite(mom))[0]
                raise QuadratureError(
                    f"quadrature blow-up in triangle pair ({lo + int(bad[0])}, {int(bad[1])})"
                )
            _core.scatter_tile(mom, lo, *a.rwg_args(), *b.rwg_args(), flags, bool(same_surface),
                               vs, ws, vd, wd, ks, kd)
    finally:
        if pool is not None:
            pool.shutdown()
    return RawBlocks(
        vs if single else None, ws if single else None,
        vd if diff_scalar else None, wd if diff_scalar else None,
        ks if grad_single else None, kd if grad_diff else None,
    )
