"""Numerical property checks: imaginary-axis triviality, compactness, coercivity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..assembly import assemble_K_same, diff_blocks, tilde_from_diff
from ..kernels import Wavenumbers
from .families import MatrixFamily


@dataclass
class AxisEntry:
    kappa: float
    sigma_min: float
    neighbours: tuple
    dip: bool


@dataclass
class AxisReport:
    entries: list = field(default_factory=list)
    floor: float = 0.0
    passed: bool = True
    failing: list = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return f"imaginary-axis check passed for kappa in {[e.kappa for e in self.entries]}"
        return "imaginary-axis check failed at kappa = " + ", ".join(f"{k:g}" for k in self.failing)


def raw_sigma_min(family: MatrixFamily, k) -> float:
    return float(np.linalg.svd(family.matrix(k), compute_uv=False)[-1])


def imaginary_axis_check(family: MatrixFamily, kappas, floor: float = 0.0,
                         dip_ratio: float = 0.1, spread: float = 0.05) -> AxisReport:
    """``sigma_min(L(i kappa))`` for each kappa, with a local dip test.

    A kappa fails when ``sigma_min`` is at or below ``floor`` or when it
    lies below ``dip_ratio`` times both values at ``kappa (1 -+ spread)``
    (an isolated, candidate-level dip).
    """
    rep = AxisReport(floor=floor)
    for kappa in kappas:
        kappa = float(kappa)
        if kappa <= 0:
            raise ValueError("kappas must be positive")
        s = raw_sigma_min(family, 1j * kappa)
        lo = raw_sigma_min(family, 1j * kappa * (1 - spread))
        hi = raw_sigma_min(family, 1j * kappa * (1 + spread))
        dip = s < dip_ratio * min(lo, hi)
        rep.entries.append(AxisEntry(kappa, s, (lo, hi), bool(dip)))
        if dip or not s > floor:
            rep.failing.append(kappa)
    rep.passed = not rep.failing
    return rep


def singular_values(a) -> np.ndarray:
    return np.linalg.svd(a, compute_uv=False)


def kdiff_ratio(space, k, n, index: int = 20, orders=None) -> float:
    """``sigma_index(K_k1 - K_k) / sigma_index(K_k)`` (1-based index)."""
    w = Wavenumbers(k, n)
    d = diff_blocks(w.k, w.k1, space, orders)
    ks = assemble_K_same(k, space, orders).matrix
    return float(singular_values(d.kd)[index - 1] / singular_values(ks)[index - 1])


def compact_combination_ratio(family, k, n, index: int = 20) -> float:
    """``sigma_index(L(k) + gamma L(i|k|)) / sigma_index(L(k))``.

    ``gamma = (k1^2 - k^2) / (|k1|^2 - |k|^2)``, which is 1 for real k.
    """
    k = complex(k)
    k1sq = k * k * n
    gamma = (k1sq - k * k) / (abs(k1sq) - abs(k * k))
    lk = family.matrix(k)
    comb = lk + gamma * family.matrix(1j * abs(k))
    return float(singular_values(comb)[index - 1] / singular_values(lk)[index - 1])


def coercivity_constant(space, split, kappa, n, orders=None) -> float:
    """Smallest singular value of tilde-L(i kappa) on the (M, Q) subspace."""
    w = Wavenumbers(1j * kappa, n)
    d = diff_blocks(w.k, w.k1, space, orders)
    sys_ = tilde_from_diff(d, split, n)
    sub = np.block([[sys_.blocks["11"], sys_.blocks["12"]],
                    [sys_.blocks["21"], sys_.blocks["22"]]])
    return float(singular_values(sub)[-1])
