import csv
import io
import json

import numpy as np
import pytest
from scipy import integrate

from transbem.mesh import make_icosphere
from transbem.solver import (BeynError, CallableFamily, ContourSpec, EigenCandidate, FarFieldFilter,
                             FilterError, ScanError, TransmissionFamily, apply_filter, beyn_solve,
                             candidates_csv, candidates_json, far_field, fibonacci_directions,
                             imaginary_axis_check, in_analytic_domain, scan_curve_text, sigma_scan)
from transbem.solver.candidate import CSV_FIELDS
from transbem.spaces import build_space


def shift_family(*roots):
    return CallableFamily(lambda k: np.diag([k - r for r in roots]))


# ----------------------------------------------------------------------------- scan

def test_scan_synthetic_single_dip():
    fam = CallableFamily(lambda k: (k - 2.0) * np.eye(3))
    res = sigma_scan(fam, 1.0, 3.3, 37)
    assert len(res.candidates) == 1
    assert abs(res.candidates[0].k.real - 2.0) <= 1e-4
    assert np.all(np.diff(res.ks) > 0) and len(res.sigmas) == 37


def test_scan_empty_between_roots():
    fam = shift_family(1.0, 4.0)
    res = sigma_scan(fam, 1.8, 3.2, 30)
    assert res.candidates == []


def test_scan_threshold_relative_to_median():
    fam = shift_family(2.0)
    res = sigma_scan(fam, 1.0, 3.3, 37, threshold=0.1)
    assert res.threshold == pytest.approx(0.1 * res.median)


def test_scan_reports_failures_and_continues():
    def func(k):
        if abs(k - 1.5) < 1e-9:
            raise RuntimeError("boom")
        return np.diag([k - 2.3, k + 1.0])

    res = sigma_scan(CallableFamily(func), 1.0, 3.0, 5)
    assert len(res.failures) == 1 and res.failures[0][0] == pytest.approx(1.5)
    assert "boom" in res.failures[0][1]
    assert len(res.candidates) == 1 and abs(res.candidates[0].k.real - 2.3) <= 1e-4


def test_scan_follows_edge_dip():
    res = sigma_scan(shift_family(3.02), 1.0, 3.0, 41)
    assert len(res.candidates) == 1
    assert res.candidates[0].k.real == pytest.approx(3.02, abs=1e-4)
    assert "outside the scan window" in res.candidates[0].notes[0]


@pytest.mark.parametrize("args", [(0.0, 1.0, 10), (2.0, 1.0, 10), (1.0, 2.0, 1)])
def test_scan_preconditions(args):
    with pytest.raises(ScanError):
        sigma_scan(shift_family(2.0), *args)


def test_scan_workers_identical():
    fam = CallableFamily(lambda k: np.array([[k - 2.0, 0.3], [0.1, k * k - 1.0]]))
    a = sigma_scan(fam, 0.5, 3.0, 25, workers=1)
    b = sigma_scan(fam, 0.5, 3.0, 25, workers=4)
    assert np.array_equal(a.sigmas, b.sigmas)
    assert [c.k for c in a.candidates] == [c.k for c in b.candidates]


# ----------------------------------------------------------------------------- Beyn

def test_beyn_single_eigenvalue():
    out = beyn_solve(shift_family(2.0, 3.0), ContourSpec(2.0, 0.5))
    assert len(out) == 1
    c = out[0]
    assert abs(c.k - 2.0) < 1e-10 and c.accepted
    v = c.kernel_vec / np.linalg.norm(c.kernel_vec)
    assert abs(abs(v[0]) - 1.0) < 1e-10 and abs(v[1]) < 1e-10


def test_beyn_two_eigenvalues():
    out = beyn_solve(shift_family(2.0, 3.0), ContourSpec(2.0, 1.5))
    assert sorted(round(c.k.real, 10) for c in out) == [2.0, 3.0]
    assert all(abs(c.k.imag) < 1e-10 for c in out)


def test_beyn_clusters_degenerate():
    out = beyn_solve(shift_family(2.0, 2.0, 2.0, 5.0), ContourSpec(2.0, 0.5))
    assert len(out) == 1 and out[0].multiplicity == 3


def test_beyn_empty_contour():
    assert beyn_solve(shift_family(2.0, 3.0), ContourSpec(5.0, 0.5)) == []


def test_contour_preconditions():
    with pytest.raises(ValueError, match="analyticity domain"):
        ContourSpec(-0.05, 0.1)
    with pytest.raises(ValueError, match="analyticity domain"):
        ContourSpec(0.5, 0.6)
    with pytest.raises(ValueError):
        ContourSpec(2.0, 0.5, nodes=8)
    with pytest.raises(ValueError):
        ContourSpec(2.0, -1.0)
    assert in_analytic_domain(1j) and not in_analytic_domain(-1.0)


def test_beyn_touching_spectrum():
    fam = CallableFamily(lambda k: np.diag([k - 2.0, 0.0]))
    with pytest.raises(BeynError, match="contour touches spectrum"):
        beyn_solve(fam, ContourSpec(2.0, 0.5))


def test_beyn_retries_when_node_hits_eigenvalue():
    # node t = 0 of the default contour sits exactly on k = 2.5
    out = beyn_solve(shift_family(2.0, 2.5), ContourSpec(2.0, 0.5))
    assert len(out) in (1, 2) and any(abs(c.k - 2.0) < 1e-10 for c in out)


def test_beyn_rank_ambiguous():
    # L^-1 = I + diag(w) / (k - 2): residues decay by 3x with no gap down to round-off
    weights = 0.5 * 3.0 ** -np.arange(36)
    fam = CallableFamily(lambda k: np.diag((k - 2.0) / (k - 2.0 + weights)))
    with pytest.raises(BeynError, match="rank tolerance ambiguous"):
        beyn_solve(fam, ContourSpec(2.0, 0.5, probes=40))


def test_beyn_probe_count_too_small():
    fam = shift_family(1.9, 2.0, 2.1, 4.0)
    with pytest.raises(BeynError, match="probe count"):
        beyn_solve(fam, ContourSpec(2.0, 0.5, probes=2))


# ----------------------------------------------------------------------------- far field

@pytest.fixture(scope="module")
def level1():
    return build_space(make_icosphere(1.0, 1))


def test_far_field_single_rwg_matches_direct_integral(level1):
    sp = level1
    dof = 7
    vec = np.zeros(2 * sp.dimension, dtype=complex)
    vec[dof] = 1.0
    d = np.array([0.0, 0.0, 1.0])
    ff = far_field(vec, 1.0, sp, d[None, :], order=10)[0]

    mh = np.zeros(3, dtype=complex)
    for t, _, _ in sp.local_data(dof):
        v = sp.mesh.vertices[sp.mesh.triangles[t]]
        area = sp.mesh.areas[t]
        for c in range(3):
            for part in (np.real, np.imag):
                def f(b, a, c=c, part=part):
                    bary = np.array([1.0 - a - b, a, b])
                    x = bary @ v
                    return part(sp.evaluate(dof, t, bary)[c] * np.exp(-1j * (d @ x)))
                val, _ = integrate.dblquad(f, 0.0, 1.0, 0.0, lambda a: 1.0 - a, epsabs=1e-13)
                mh[c] += 2.0 * area * val * (1j if part is np.imag else 1.0)
    ref = 1j * np.cross(d, mh) / (4.0 * np.pi)
    assert np.abs(ff - ref).max() <= 1e-10 * np.abs(ref).max()


def test_far_field_tangential(level1):
    rng = np.random.default_rng(3)
    vec = rng.standard_normal(2 * level1.dimension) + 1j * rng.standard_normal(2 * level1.dimension)
    d = fibonacci_directions(64)
    ff = far_field(vec, 1.7, level1, d)
    dots = np.abs(np.einsum("pc,pc->p", d, ff))
    assert dots.max() <= 1e-13 * np.abs(ff).max()


def test_far_field_rejects_non_unit_directions(level1):
    vec = np.ones(2 * level1.dimension)
    with pytest.raises(ValueError):
        far_field(vec, 1.0, level1, np.array([[0.0, 0.0, 2.0]]))


def test_fibonacci_directions_unit():
    d = fibonacci_directions(64)
    assert d.shape == (64, 3) and np.allclose(np.linalg.norm(d, axis=1), 1.0)


def test_filter_rejects_random_candidates(level1):
    flt = FarFieldFilter(level1)
    rng = np.random.default_rng(11)
    for k in (1.0, 3.0):
        for _ in range(5):
            v = rng.standard_normal(2 * level1.dimension) + 1j * rng.standard_normal(2 * level1.dimension)
            c = apply_filter(EigenCandidate(complex(k), 0.0, v), flt)
            assert not c.accepted and 0.3 < c.farfield_residual / flt.baseline(k) < 3.0
            assert "far-field residual" in c.notes[-1]


def test_filter_zero_vector(level1):
    flt = FarFieldFilter(level1)
    with pytest.raises(FilterError, match="empty kernel vector"):
        apply_filter(EigenCandidate(2.0, 0.0, np.zeros(2 * level1.dimension)), flt)
    with pytest.raises(FilterError, match="empty kernel vector"):
        apply_filter(EigenCandidate(2.0, 0.0, None), flt)


# ----------------------------------------------------------------------------- checks

def test_axis_check_names_synthetic_zero():
    fam = CallableFamily(lambda k: np.diag([k - 3.0j, k + 1.0]))
    rep = imaginary_axis_check(fam, [1.0, 3.0, 5.0], floor=1e-8)
    assert not rep.passed and rep.failing == [3.0]
    assert "3" in rep.summary()


def test_axis_check_passes_without_zero():
    fam = CallableFamily(lambda k: np.diag([k - 3.0, k + 1.0]))
    rep = imaginary_axis_check(fam, [1.0, 2.0], floor=1e-3)
    assert rep.passed and len(rep.entries) == 2


def test_axis_check_empty_list():
    rep = imaginary_axis_check(shift_family(1.0), [])
    assert rep.passed and rep.entries == []


def test_axis_check_rejects_nonpositive_kappa():
    with pytest.raises(ValueError):
        imaginary_axis_check(shift_family(1.0), [0.0])


# ----------------------------------------------------------------------------- candidates

def test_candidate_invariants():
    with pytest.raises(ValueError):
        EigenCandidate(2.0, -1e-3)


def test_csv_round_trip():
    cands = [EigenCandidate(3.1 + 1e-5j, 1e-4, None, 2e-3, True),
             EigenCandidate(3.5, 2e-3, None, None, False)]
    rows = list(csv.reader(io.StringIO(candidates_csv(cands))))
    assert tuple(rows[0]) == CSV_FIELDS
    assert complex(float(rows[1][0]), float(rows[1][1])) == cands[0].k
    assert float(rows[1][2]) == 1e-4 and rows[1][4] == "1"
    assert rows[2][3] == "" and rows[2][4] == "0"


def test_json_round_trip():
    v = np.array([1.0 + 2.0j, -0.5j, 0.25])
    c = EigenCandidate(3.17 - 2e-6j, 1.5e-4, v, 3e-3, True, 3, "beyn", ["note"])
    doc = json.loads(candidates_json([c], meta={"x": 1}))
    back = EigenCandidate.from_record(doc["candidates"][0])
    assert doc["meta"] == {"x": 1}
    assert back.k == c.k and back.sigma_min == c.sigma_min and back.multiplicity == 3
    assert np.array_equal(back.kernel_vec, v) and back.notes == ["note"] and back.source == "beyn"


def test_scan_curve_text():
    txt = scan_curve_text([1.0, 1.5], [0.3, 0.2])
    assert txt.splitlines() == ["# k sigma_min", "1.0 0.3", "1.5 0.2"]


# ----------------------------------------------------------------------------- sphere systems

@pytest.mark.slow
def test_kernel_vector_consistency(level1):
    for normalized in (False, True):
        fam = TransmissionFamily(level1, 4.0, normalized=normalized)
        k = 3.2
        s, v = fam.kernel_vector(k)
        res = np.linalg.norm(fam.metric_matrix(k) @ v) / np.linalg.norm(v)
        assert res <= 10.0 * s
        assert res == pytest.approx(s, rel=1e-8)


@pytest.mark.slow
def test_sigma_conjugation_symmetry(level1):
    fam = TransmissionFamily(level1, 4.0, normalized=False)
    k = 2.0 + 0.3j
    a = np.linalg.svd(fam.matrix(k), compute_uv=False)
    b = np.linalg.svd(fam.matrix(-k.conjugate()), compute_uv=False)
    assert np.abs(a - b).max() <= 1e-12 * a.max()


@pytest.mark.slow
def test_sphere_scan_empty_below_first_root(level1):
    # the first n = 4 oracle root is pi; nothing may be flagged well below it
    fam = TransmissionFamily(level1, 4.0)
    res = sigma_scan(fam, 1.0, 2.8, 10)
    assert res.candidates == []
