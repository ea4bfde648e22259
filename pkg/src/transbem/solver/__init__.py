"""Eigenvalue search on the transmission operator family."""

from .beyn import BeynError, ContourSpec, beyn_solve, leaves_domain_ok
from .candidate import EigenCandidate, candidates_csv, candidates_json, scan_curve_text
from .checks import (
    AxisReport,
    coercivity_constant,
    compact_combination_ratio,
    imaginary_axis_check,
    kdiff_ratio,
    raw_sigma_min,
)
from .families import (
    CallableFamily,
    MatrixFamily,
    SchurFamily,
    TransmissionFamily,
    in_analytic_domain,
)
from .filtering import FarFieldFilter, FilterError, apply_filter, farfield_residual
from .potentials import (
    dipole_fields,
    far_field,
    fibonacci_directions,
    represented_fields,
    rwg_interpolant,
    tangential_trace_tests,
)
from .scan import ScanError, ScanResult, sigma_scan

__all__ = [
    "AxisReport", "BeynError", "CallableFamily", "ContourSpec", "EigenCandidate",
    "FarFieldFilter", "FilterError", "MatrixFamily", "ScanError", "ScanResult",
    "SchurFamily", "TransmissionFamily", "apply_filter", "beyn_solve",
    "candidates_csv", "candidates_json", "coercivity_constant",
    "compact_combination_ratio", "dipole_fields", "far_field", "farfield_residual",
    "fibonacci_directions", "imaginary_axis_check", "in_analytic_domain", "kdiff_ratio",
    "leaves_domain_ok", "raw_sigma_min", "represented_fields", "rwg_interpolant",
    "scan_curve_text", "sigma_scan", "tangential_trace_tests",
]
