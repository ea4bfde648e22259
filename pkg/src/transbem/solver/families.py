"""Matrix-valued families ``k -> A(k)`` consumed by the eigenvalue searches.

Every family exposes ``matrix(k)``, the holomorphic system itself, and
``metric_matrix(k)``, the matrix whose smallest singular value is used
to localize eigenvalues.  For the transmission systems the metric matrix
is ``L(i|k|)^{-1} L(k)``: the compact-combination property makes it
identity-like away from eigenvalues, so dips are visible on any mesh,
while its kernel coincides with that of ``L(k)``.
"""

from __future__ import annotations

import cmath

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from ..assembly import (
    QuadratureOrders,
    assemble_schur,
    diff_blocks,
    system_from_diff,
)
from ..cache import CacheKey, MatrixCache
from ..kernels import Wavenumbers

# dense SVD up to this dimension, LU + ARPACK on the inverse above it
DENSE_SVD_LIMIT = 2000


class MatrixFamily:
    """Base class; subclasses implement :meth:`matrix`."""

    normalized = False

    def matrix(self, k) -> np.ndarray:
        raise NotImplementedError

    def reference_k(self, k):
        return 1j * abs(k)

    def metric_matrix(self, k) -> np.ndarray:
        a = self.matrix(k)
        if not self.normalized:
            return a
        return sla.solve(self.matrix(self.reference_k(k)), a)

    def sigma_min(self, k) -> float:
        if self.dimension > DENSE_SVD_LIMIT:
            return self._inverse_iteration(k)[0]
        return float(np.linalg.svd(self.metric_matrix(k), compute_uv=False)[-1])

    def kernel_vector(self, k):
        """Smallest singular value and its right singular vector."""
        if self.dimension > DENSE_SVD_LIMIT:
            return self._inverse_iteration(k)
        _, s, vh = np.linalg.svd(self.metric_matrix(k))
        return float(s[-1]), vh[-1].conj()

    def _inverse_iteration(self, k):
        """Largest singular triple of the inverse metric matrix via ARPACK.

        With ``A = R^{-1} L`` the inverse is ``L^{-1} R``; its top left
        singular vector is the right singular vector of ``A`` for
        ``sigma_min``.
        """
        a = self.matrix(k)
        lu = sla.lu_factor(a, check_finite=True)
        if self.normalized:
            ref = self.matrix(self.reference_k(k))
            mv = lambda x: sla.lu_solve(lu, ref @ x)
            rmv = lambda y: ref.conj().T @ sla.lu_solve(lu, y, trans=2)
        else:
            mv = lambda x: sla.lu_solve(lu, x)
            rmv = lambda y: sla.lu_solve(lu, y, trans=2)
        n = a.shape[0]
        op = spla.LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=complex)
        v0 = np.ones(n, dtype=complex) / np.sqrt(n)
        u, s, _ = spla.svds(op, k=1, which="LM", v0=v0, tol=1e-10, solver="arpack")
        return float(1.0 / s[0]), u[:, 0]

    @property
    def dimension(self) -> int:
        raise NotImplementedError


class CallableFamily(MatrixFamily):
    """Wrap a plain function ``k -> ndarray`` (synthetic systems)."""

    def __init__(self, func, normalized=False):
        self.func = func
        self.normalized = normalized

    def matrix(self, k):
        return np.atleast_2d(np.asarray(self.func(k), dtype=complex))

    @property
    def dimension(self):
        return self.matrix(1.0).shape[0]


class TransmissionFamily(MatrixFamily):
    """``L(k)`` on one closed surface with constant contrast ``n``."""

    normalized = True

    def __init__(self, space, n, orders: QuadratureOrders | None = None, workers=None,
                 cache: MatrixCache | None = None, normalized=True):
        Wavenumbers(1.0, n)  # validates the contrast
        self.space = space
        self.n = float(n)
        self.orders = orders or QuadratureOrders()
        self.workers = workers
        self.cache = cache
        self.normalized = normalized

    @property
    def dimension(self):
        return 2 * self.space.dimension

    def _key(self, k):
        return CacheKey("L", complex(k), (self.n,), self.space.mesh.content_hash,
                        self.orders.as_tuple())

    def system(self, k):
        w = Wavenumbers(k, self.n)
        return system_from_diff(diff_blocks(w.k, w.k1, self.space, self.orders, self.workers),
                                self.n)

    def matrix(self, k):
        k = complex(k)
        if self.cache is not None:
            hit = self.cache.get(self._key(k))
            if hit is not None:
                return hit
        mat = self.system(k).matrix()
        if self.cache is not None:
            self.cache.put(self._key(k), mat)
        return mat


class SchurFamily(MatrixFamily):
    """Two-layer Schur complement on the outer surface."""

    normalized = True

    def __init__(self, outer, inner, n1, n2, orders=None, workers=None, cache=None,
                 normalized=True, cond_limit=1e12):
        self.outer = outer
        self.inner = inner
        self.n1, self.n2 = float(n1), float(n2)
        self.orders = orders or QuadratureOrders()
        self.workers = workers
        self.cache = cache
        self.normalized = normalized
        self.cond_limit = cond_limit
        self.conditions: dict = {}

    @property
    def dimension(self):
        return 2 * self.outer.dimension

    def _key(self, k, kind="schur"):
        h = self.outer.mesh.content_hash + ":" + self.inner.mesh.content_hash
        return CacheKey(kind, complex(k), (self.n1, self.n2), h, self.orders.as_tuple())

    def system(self, k):
        return assemble_schur(k, self.outer, self.inner, self.n1, self.n2, self.orders,
                              self.workers, self.cond_limit)

    def matrix(self, k):
        k = complex(k)
        if self.cache is not None:
            hit = self.cache.get(self._key(k))
            cond = self.cache.get(self._key(k, "schur-cond"))
            if hit is not None and cond is not None:
                self.conditions[k] = float(cond[0, 0].real)
                return hit
        sys_ = self.system(k)
        self.conditions[k] = sys_.info["l21_condition"]
        mat = sys_.matrix()
        if self.cache is not None:
            self.cache.put(self._key(k), mat)
            self.cache.put(self._key(k, "schur-cond"), np.array([[self.conditions[k]]], dtype=complex))
        return mat


def in_analytic_domain(k) -> bool:
    k = complex(k)
    return not (k.imag == 0.0 and k.real <= 0.0) and cmath.isfinite(k)
