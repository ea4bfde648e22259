import cmath
import json

import mpmath
import numpy as np
import pytest

from transbem.mie import (OracleError, build_determinant, find_roots, oracle_roots, roots_json,
                          sphere_operator_eig, spherical_bessel, verify_root)


def test_j0_closed_form():
    assert spherical_bessel(0, 1.0).j == pytest.approx(np.sin(1.0), abs=1e-15)
    assert abs(spherical_bessel(0, 1.0).j - 0.841471) < 1e-6


def _wronskian_terms(l, z):
    b = spherical_bessel(l, z)
    # Riccati derivatives: f' = (dF - f) / z with F = z f
    dj = (b.dj - b.j) / z
    dy = (b.dy - b.y) / z
    return b.j * dy * z * z, dj * b.y * z * z


@pytest.mark.parametrize("z", [0.3 + 0.1j, 2.5, 7.0 - 3.0j, 0.9j, 12.0 + 1.5j])
def test_wronskian(z):
    for l in range(11):
        a, b = _wronskian_terms(l, z)
        assert abs(a - b - 1.0) < 1e-12


def test_wronskian_random_arguments():
    # for large |Im z| both terms grow like exp(2|Im z|); compare at their scale
    rng = np.random.default_rng(7)
    for _ in range(40):
        z = complex(rng.uniform(0.1, 35.0), rng.uniform(-35.0, 35.0))
        for l in range(11):
            a, b = _wronskian_terms(l, z)
            assert abs(a - b - 1.0) <= 1e-12 * max(1.0, abs(a) + abs(b))


@pytest.mark.parametrize("z", [1j, 1.0, 3.0 + 2.0j])
def test_h1_0_closed_form(z):
    assert abs(spherical_bessel(0, z).h1 - (-1j * cmath.exp(1j * z) / z)) < 1e-14


@pytest.mark.parametrize("l,z", [(5, 2.0 + 1.0j), (20, 30.0), (40, 45.0 - 20.0j), (3, 0.01)])
def test_bessel_against_mpmath(l, z):
    b = spherical_bessel(l, z)
    ref_j = complex(mpmath.sqrt(mpmath.pi / (2 * z)) * mpmath.besselj(l + 0.5, z))
    ref_y = complex(mpmath.sqrt(mpmath.pi / (2 * z)) * mpmath.bessely(l + 0.5, z))
    assert abs(b.j - ref_j) <= 1e-12 * abs(ref_j)
    assert abs(b.y - ref_y) <= 1e-12 * abs(ref_y)


def test_bessel_zero_argument():
    with pytest.raises(OracleError):
        spherical_bessel(1, 0.0)


def test_te1_sign_change():
    det = build_determinant("TE", 1, 4.0)
    ks = np.linspace(1.0, 6.0, 501)
    vals = np.array([det(k) for k in ks])
    assert np.any(vals[:-1] * vals[1:] < 0)
    roots = find_roots(det, (0.5, 6.0))
    assert roots and roots[0].k == pytest.approx(np.pi, abs=1e-9)


def test_determinant_real_and_conjugate():
    det = build_determinant("TM", 2, 4.0)
    assert isinstance(det(2.3), float)
    z = 2.3 + 0.4j
    assert abs(det(z.conjugate()) - np.conj(det(z))) < 1e-12 * abs(det(z))


def test_preconditions():
    for args in [("TE", 0, 4.0), ("TE", 1, 1.0), ("TE", 1, -2.0), ("XX", 1, 4.0)]:
        with pytest.raises(OracleError):
            build_determinant(*args)
    with pytest.raises(OracleError):
        build_determinant("TE", 1, 4.0, R=0.0)


@pytest.mark.parametrize("family", ["TE", "TM"])
def test_unit_contrast_limit(family):
    ks = np.linspace(1.0, 5.0, 81)
    for l in (1, 2, 3):
        near = max(abs(build_determinant(family, l, 1.0 + 1e-8)(k)) for k in ks)
        scale = max(abs(build_determinant(family, l, 4.0)(k)) for k in ks)
        assert near < 1e-6 * scale


def test_radius_scaling():
    r1 = oracle_roots(4.0, 1.0, (0.5, 6.0), lmax=3)
    r2 = oracle_roots(4.0, 2.0, (0.25, 3.0), lmax=3)
    assert len(r1) == len(r2)
    for a, b in zip(r1, r2):
        assert b.k == pytest.approx(a.k / 2.0, rel=1e-9)


def test_synthetic_simple_root():
    roots = find_roots(lambda k: k - 2.0, (1.0, 3.0))
    assert len(roots) == 1 and abs(roots[0].k - 2.0) <= 1e-10 and not roots[0].grazing


def test_synthetic_grazing_root():
    roots = find_roots(lambda k: (k - 2.0037) ** 2, (1.0, 3.0))
    assert len(roots) == 1 and roots[0].grazing
    assert roots[0].k == pytest.approx(2.0037, abs=1e-5)


def test_root_interval_precondition():
    with pytest.raises(OracleError):
        find_roots(lambda k: k - 2.0, (-1.0, 3.0))


def test_n4_reference_roots():
    ks = [r.k for r in oracle_roots(4.0, interval=(0.5, 5.0))]
    ref = [3.1416, 3.4928, 3.5929, 3.6924, 3.9026, 4.2617, 4.4303, 4.8319, 4.9796]
    assert len(ks) == len(ref)
    assert np.allclose(ks, ref, atol=1e-4)


def test_reciprocal_contrast_doubles_roots():
    a = [r.k for r in oracle_roots(4.0, interval=(0.5, 6.0), lmax=3)]
    b = [r.k for r in oracle_roots(0.25, interval=(1.0, 12.0), lmax=3)]
    assert np.allclose(sorted(2 * np.array(a)), b, rtol=1e-9)


def test_grid_halving_stable():
    for n in (4.0, 0.25):
        coarse = oracle_roots(n, interval=(0.5, 6.0), step=0.01)
        fine = oracle_roots(n, interval=(0.5, 6.0), step=0.005)
        assert len(coarse) == len(fine)
        assert np.allclose([r.k for r in coarse], [r.k for r in fine], atol=1e-9)


@pytest.mark.parametrize("family,l", [("TE", 1), ("TM", 1), ("TE", 2), ("TM", 3)])
def test_roots_satisfy_trace_matching(family, l):
    roots = find_roots(build_determinant(family, l, 4.0), (0.5, 6.0))
    assert roots
    for r in roots[:2]:
        assert verify_root(family, l, 4.0, r.k) <= 1e-10


def test_non_root_fails_trace_matching():
    assert verify_root("TE", 1, 4.0, 3.0) > 1e-3


def test_sphere_operator_eig_value():
    ref = complex(mpmath.sin(1) * mpmath.exp(1j))
    val = sphere_operator_eig(0, 1.0)
    assert abs(val - ref) < 1e-14
    assert abs(val - (0.454649 + 0.708073j)) < 1e-6


def test_sphere_operator_eig_limits():
    assert sphere_operator_eig(0, 1e-6) == pytest.approx(1.0, abs=1e-6)
    for l in (1, 2, 5):
        assert sphere_operator_eig(l, 1e-4) == pytest.approx(1.0 / (2 * l + 1), rel=1e-6)
    # h1 has no real-coefficient symmetry off the real axis: the identity is f(-conj z) = conj f(z)
    z = 1.7 + 0.6j
    for l in (0, 3):
        assert abs(sphere_operator_eig(l, -z.conjugate()) - np.conj(sphere_operator_eig(l, z))) < 1e-14


def test_roots_json_schema():
    doc = json.loads(roots_json(4.0, lmax=2))
    assert {tuple(sorted(g)) for g in doc["modes"]} == {("R", "family", "grazing", "l", "n", "roots")}
    assert sum(len(g["roots"]) for g in doc["modes"]) >= 1
