"""Far-field filter separating genuine transmission eigenpairs from spurious kernels.

A kernel vector ``(M, J)`` of ``L(k)`` belongs to a transmission
eigenvalue when the field ``P_k(M, J)`` it represents vanishes outside
the scatterer, hence when its far-field pattern vanishes.  The residual
is the largest far-field amplitude over a fixed direction set divided by
the coefficient norm; it is compared with the mean residual of random
densities at the same wavenumber.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .candidate import EigenCandidate
from .potentials import far_field, fibonacci_directions

DEFAULT_FF_THRESHOLD = 0.1


class FilterError(ValueError):
    pass


def farfield_residual(vec, k, space, directions) -> float:
    vec = np.asarray(vec, dtype=complex)
    nrm = np.linalg.norm(vec)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise FilterError("empty kernel vector")
    return float(np.abs(far_field(vec, k, space, directions)).max() / nrm)


@dataclass
class FarFieldFilter:
    space: object
    threshold: float = DEFAULT_FF_THRESHOLD
    n_directions: int = 64
    baseline_samples: int = 20
    seed: int = 2024

    def __post_init__(self):
        self.directions = fibonacci_directions(self.n_directions)
        self._baselines: dict = {}

    def baseline(self, k) -> float:
        """Mean residual of complex Gaussian random densities at ``k``."""
        k = complex(k)
        if k not in self._baselines:
            rng = np.random.default_rng(self.seed)
            dim = 2 * self.space.dimension
            vals = []
            for _ in range(self.baseline_samples):
                v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
                vals.append(farfield_residual(v, k, self.space, self.directions))
            self._baselines[k] = float(np.mean(vals))
        return self._baselines[k]

    def residual(self, vec, k) -> float:
        return farfield_residual(vec, k, self.space, self.directions)

    def ratio(self, vec, k) -> float:
        return self.residual(vec, k) / self.baseline(k)

    def __call__(self, cand: EigenCandidate) -> EigenCandidate:
        return apply_filter(cand, self)


def apply_filter(cand: EigenCandidate, flt: FarFieldFilter, threshold: float | None = None):
    """Set ``farfield_residual`` and ``accepted`` on a candidate (in place)."""
    if cand.kernel_vec is None:
        raise FilterError("empty kernel vector")
    thr = flt.threshold if threshold is None else threshold
    res = flt.residual(cand.kernel_vec, cand.k)
    base = flt.baseline(cand.k)
    cand.farfield_residual = res
    passed = res <= thr * base
    if not passed:
        cand.notes.append(f"far-field residual {res:.3e} above {thr:g} x baseline {base:.3e}")
    cand.accepted = bool(passed) and (cand.accepted or cand.source == "scan")
    return cand
