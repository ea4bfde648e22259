"""Eigenvalue candidates and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EigenCandidate:
    k: complex
    sigma_min: float
    kernel_vec: np.ndarray | None = field(default=None, repr=False)
    farfield_residual: float | None = None
    accepted: bool = False
    multiplicity: int = 1
    source: str = "scan"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.sigma_min < 0:
            raise ValueError("sigma_min must be non-negative")

    def to_record(self, include_vector: bool = True) -> dict:
        rec = {
            "k_re": float(np.real(self.k)),
            "k_im": float(np.imag(self.k)),
            "sigma_min": float(self.sigma_min),
            "farfield_residual": None if self.farfield_residual is None else float(self.farfield_residual),
            "accepted": bool(self.accepted),
            "multiplicity": int(self.multiplicity),
            "source": self.source,
            "notes": list(self.notes),
        }
        if include_vector and self.kernel_vec is not None:
            v = np.asarray(self.kernel_vec)
            rec["kernel_vec_re"] = [float(x) for x in v.real]
            rec["kernel_vec_im"] = [float(x) for x in v.imag]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "EigenCandidate":
        vec = None
        if "kernel_vec_re" in rec:
            vec = np.asarray(rec["kernel_vec_re"]) + 1j * np.asarray(rec["kernel_vec_im"])
        return cls(complex(rec["k_re"], rec["k_im"]), rec["sigma_min"], vec,
                   rec.get("farfield_residual"), rec.get("accepted", False),
                   rec.get("multiplicity", 1), rec.get("source", "scan"), rec.get("notes", []))


CSV_FIELDS = ("k_re", "k_im", "sigma_min", "residual", "accepted")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def candidates_csv(cands) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for c in cands:
        w.writerow([_fmt(np.real(c.k)), _fmt(np.imag(c.k)), _fmt(c.sigma_min),
                    _fmt(c.farfield_residual), int(bool(c.accepted))])
    return buf.getvalue()


def candidates_json(cands, include_vector: bool = True, meta: dict | None = None) -> str:
    doc = {"meta": meta or {}, "candidates": [c.to_record(include_vector) for c in cands]}
    return json.dumps(doc, indent=1, sort_keys=True)


def scan_curve_text(ks, sigmas) -> str:
    lines = ["# k sigma_min"]
    for k, s in zip(ks, sigmas):
        lines.append(f"{float(np.real(k))!r} {float(s)!r}")
    return "\n".join(lines) + "\n"
