import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from koebecenter import centers as C
from koebecenter import hypcore as hc
from koebecenter import koebe
from koebecenter.errors import DegeneracyError, DomainError, SpecMismatchError

SMOOTH = ["cm0", "cm1", "cm2", "cm3", "tangency"]
SIMPLICIAL = ["ccm", "euler:0.5"]


def trapezoid_surface_centroid(poly):
    """Paper-model oracle: split every trapezoid into two triangles."""
    area, mom = 0.0, np.zeros(3)
    for V, e1, Cj, e2 in poly.trapezoids:
        for a, b, c in ((V, e1, Cj), (V, Cj, e2)):
            ar = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
            area += ar
            mom += ar * (a + b + c) / 3
    return mom / area, area


def trapezoid_solid_centroid(poly):
    """Cones from o over the trapezoids; a cone's centroid sits 3/4 of the way to its base centroid."""
    vol, mom = 0.0, np.zeros(3)
    for V, e1, Cj, e2 in poly.trapezoids:
        for a, b, c in ((V, e1, Cj), (V, Cj, e2)):
            v = abs(np.dot(a, np.cross(b, c))) / 6
            vol += v
            mom += v * 0.75 * (a + b + c) / 3
    return mom / vol, vol


def test_spec_parsing():
    assert C.CenterSpec.parse("euler:0.5").lam == 0.5
    assert C.CenterSpec.parse("CM2").kind is C.CenterKind.CM2
    with pytest.raises((DomainError, ValueError)):
        C.CenterSpec.parse("euler:1.0")
    with pytest.raises((DomainError, ValueError)):
        C.CenterSpec.parse("bogus")
    assert C.CenterSpec.parse("cm3").experimental
    assert C.CenterSpec.parse("ccm").needs_simplicial


def test_spec_mismatch(canonical):
    for text in ("ccm", "euler:0.3"):
        with pytest.raises(SpecMismatchError):
            C.evaluate(C.CenterSpec.parse(text), canonical["cube"])


def test_canonical_centers_vanish(canonical):
    for name, s in canonical.items():
        specs = SMOOTH + (SIMPLICIAL if s.combinatorics.is_simplicial else [])
        for text in specs:
            assert C.evaluate(C.CenterSpec.parse(text), s).norm < 1e-12, (name, text)


def test_tetra_normalizers(canonical):
    s = canonical["tetrahedron"]
    assert C.cm1(s).normalizer / 2 == pytest.approx(12 * np.sqrt(2), rel=1e-14)
    assert C.cm2(s).normalizer / 3 == pytest.approx(8 * np.sqrt(3), rel=1e-14)
    assert C.cm3(s).normalizer / 4 == pytest.approx(8, rel=1e-14)
    assert C.ccm(s).normalizer == pytest.approx(8 / 3, rel=1e-14)


def test_oracle_equivalence(perturbed):
    for s in perturbed.values():
        P = koebe.reconstruct(s)
        np.testing.assert_allclose(C.cm0(s).point, P.vertices.mean(0), atol=1e-12)
        np.testing.assert_allclose(C.cm1(s).point, C.wire_centroid(P)[0], atol=1e-9)
        np.testing.assert_allclose(C.cm2(s).point, C.surface_centroid(P)[0], atol=1e-9)
        np.testing.assert_allclose(C.cm2(s).point, trapezoid_surface_centroid(P)[0], atol=1e-9)
        np.testing.assert_allclose(C.cm3(s).point, C.solid_centroid(P)[0], atol=1e-8)
        np.testing.assert_allclose(C.cm3(s).point, trapezoid_solid_centroid(P)[0], atol=1e-8)
        np.testing.assert_allclose(C.tangency_barycenter(s).point, P.tangency_points.mean(0), atol=1e-12)


def test_normalizer_identities(perturbed):
    for s in perturbed.values():
        P = koebe.reconstruct(s)
        hull = ConvexHull(P.vertices)
        assert C.cm1(s).normalizer / 2 == pytest.approx(P.edge_lengths.sum(), rel=1e-8)
        assert C.cm2(s).normalizer / 3 == pytest.approx(hull.area, rel=1e-8)
        assert C.cm3(s).normalizer / 4 == pytest.approx(3 * hull.volume, rel=1e-8)


def test_per_trapezoid_centroid(canonical, perturbed):
    for s in [canonical["tetrahedron"], perturbed[("cube", 1)]]:
        P = koebe.reconstruct(s)
        ii, jj, area, cf, cv = C._trapezoid_terms(s.vertex_radii, s.face_radii, s.combinatorics)
        for k, Q in enumerate(P.trapezoids):
            c, a = trapezoid_surface_centroid(type(P)(P.vertices, P.face_incenters, P.tangency_points,
                                                      Q[None], P.combinatorics))
            assert a == pytest.approx(area[k], rel=1e-12)
            np.testing.assert_allclose(c, (cv[k] * s.vertex_centers[ii[k]] + cf[k] * s.face_centers[jj[k]]) / 3,
                                       atol=1e-10)


def test_cm1_single_edge_term(perturbed):
    s = perturbed[("octahedron", 2)]
    P = koebe.reconstruct(s)
    a, b = s.combinatorics.edges[0]
    L = np.tan(s.vertex_radii[a]) + np.tan(s.vertex_radii[b])
    term = L * (s.vertex_centers[a] / np.cos(s.vertex_radii[a]) + s.vertex_centers[b] / np.cos(s.vertex_radii[b]))
    np.testing.assert_allclose(term / 2, P.edge_lengths[0] * 0.5 * (P.vertices[a] + P.vertices[b]), atol=1e-12)


def test_ccm_oracle(perturbed):
    for (name, seed), s in perturbed.items():
        if not s.combinatorics.is_simplicial:
            continue
        P = koebe.reconstruct(s)
        g, vol = C.circumcenter_of_mass_oracle(P)
        val = C.ccm(s)
        assert val.normalizer == pytest.approx(ConvexHull(P.vertices).volume, rel=1e-8)
        assert val.normalizer == pytest.approx(vol, rel=1e-8)
        # the oracle solves with Euclidean vertex coordinates, which lose accuracy when o is near a face plane
        np.testing.assert_allclose(val.point, g, atol=1e-7)


def test_octahedron_ccm_is_circumcenter(canonical):
    P = koebe.reconstruct(canonical["octahedron"])
    np.testing.assert_allclose(np.linalg.norm(P.vertices, axis=1), np.sqrt(2), atol=1e-12)
    assert C.ccm(canonical["octahedron"]).norm < 1e-12


def test_euler_point_affine(perturbed):
    s = perturbed[("octahedron", 0)]
    a, b = C.ccm(s).point, C.cm3(s).point
    np.testing.assert_allclose(C.euler_point(s, 0.0).point, a, atol=1e-15)
    for lam in np.linspace(0, 0.95, 7):
        np.testing.assert_allclose(C.euler_point(s, lam).point, lam * b + (1 - lam) * a, atol=1e-12)
    with pytest.raises(DomainError):
        C.euler_point(s, 1.0)


def test_rotation_equivariance(perturbed, rng):
    for (name, seed), s in list(perturbed.items())[::2]:
        R = hc.random_rotation(rng, 3)
        sr = koebe.perturb(s, hc.rotation_map(R))
        specs = SMOOTH + (SIMPLICIAL if s.combinatorics.is_simplicial else [])
        for text in specs:
            spec = C.CenterSpec.parse(text)
            np.testing.assert_allclose(C.evaluate(spec, sr).point, R @ C.evaluate(spec, s).point, atol=1e-10)


def test_simplex_volume_examples():
    r2 = np.sqrt(2)
    assert C.simplex_volume(r2, r2, r2) == pytest.approx(2 / 3, rel=1e-14)
    with pytest.raises(DomainError):
        C.simplex_volume(2, 2, 2)
    with pytest.raises(DomainError):
        C.simplex_volume(-1, 0.5, 0.5)


def test_simplex_volume_matches_cayley_menger(rng):
    done = 0
    while done < 1000:
        a = rng.uniform(0.05, 1.5, 3)
        if a.sum() >= np.pi:
            continue
        t = np.tan(a)
        v = C.simplex_volume(*t)
        ta, tb, tc = t
        sec = 1 / np.cos(a)
        cm = C.cayley_menger_volume(sec[0], sec[1], sec[2], ta + tb, ta + tc, tb + tc)
        assert v == pytest.approx(cm, rel=1e-9, abs=1e-12)
        done += 1


def test_cone_circumcenter_tetra_example(canonical):
    s = canonical["tetrahedron"]
    P = koebe.reconstruct(s)
    target = {(1, -1, -1), (-1, 1, -1), (-1, -1, 1)}
    j = next(j for j, f in enumerate(s.faces) if {tuple(np.round(P.vertices[i]).astype(int)) for i in f} == target)
    p = C.cone_circumcenter(s, j)
    np.testing.assert_allclose(p, [-1.5, -1.5, -1.5], atol=1e-12)
    assert np.linalg.norm(p) == pytest.approx(1.5 * np.sqrt(3), abs=1e-12)
    assert np.linalg.norm(p) == pytest.approx(2.598076, abs=1e-6)


def test_cone_circumcenter_equidistance(perturbed):
    for s in perturbed.values():
        if not s.combinatorics.is_simplicial:
            continue
        P = koebe.reconstruct(s)
        for j, f in enumerate(s.faces):
            p = C.cone_circumcenter(s, j)
            d = np.linalg.norm(p)
            for i in f:
                assert abs(np.linalg.norm(p - P.vertices[i]) - d) < 1e-9 * max(1.0, d)


def test_cone_circumcenter_rejects_non_triangle(canonical):
    with pytest.raises(SpecMismatchError):
        C.cone_circumcenter(canonical["cube"], 0)


def test_circumcenter_gram_ill_conditioned():
    # three vertices with radii summing near pi make the Gram matrix singular
    with pytest.raises(DegeneracyError):
        C.circumcenter_coefficients([[np.pi / 3, np.pi / 3, np.pi / 3]])


def test_cc2_symmetric_discrepancy():
    a = np.arctan(np.sqrt(2))
    row = C.cc2_discrepancy_report(alphas=[[a, a, a]])[0]
    np.testing.assert_allclose(row["N_printed"], 3, rtol=1e-12)
    np.testing.assert_allclose(row["N_gram"], 3 * np.sqrt(3) / 2, rtol=1e-12)
    assert row["det_gram"] == pytest.approx(16 / 27, rel=1e-12)
    assert row["det_printed"] == pytest.approx(432, rel=1e-12)
    assert row["det_36m2_over_prod"] == pytest.approx(16 / 27, rel=1e-12)


@given(st.tuples(*[st.floats(0.1, 1.2)] * 3).filter(lambda a: sum(a) < 2.8))
@settings(max_examples=200)
def test_cc2_ratio_is_two_cos_alpha(a):
    row = C.cc2_discrepancy_report(alphas=[list(a)])[0]
    np.testing.assert_allclose(row["ratio"], row["two_cos_alpha"], rtol=1e-8)
    assert row["det_gram"] == pytest.approx(row["det_36m2_over_prod"], rel=1e-8)


def test_cc2_independent_solve():
    # Gram coefficients reproduce an explicit perpendicular-bisector circumcenter
    a = np.array([0.5, 0.8, 0.7])
    th = [0.0, a[0] + a[1], None]
    v0 = np.array([0, 0, 1.0])
    v1 = np.array([np.sin(a[0] + a[1]), 0, np.cos(a[0] + a[1])])
    # place v2 at spherical distance a0+a2 from v0 and a1+a2 from v1
    c2, c12 = np.cos(a[0] + a[2]), np.cos(a[1] + a[2])
    x = (c12 - c2 * v1[2]) / v1[0]
    v2 = np.array([x, np.sqrt(1 - x * x - c2 * c2), c2])
    V = np.array([v0, v1, v2])
    X = V / np.cos(a)[:, None]
    p = np.linalg.solve(X, 0.5 * np.sum(X * X, axis=1))
    N = C.circumcenter_coefficients(a[None, :])[0]
    np.testing.assert_allclose(N @ V, p, atol=1e-12)


def test_smallest_enclosing_ball_examples(canonical, rng):
    P = koebe.reconstruct(canonical["tetrahedron"]).vertices
    c, r = C.smallest_enclosing_ball(P)
    np.testing.assert_allclose(c, 0, atol=1e-12)
    assert r == pytest.approx(np.sqrt(3), abs=1e-12)
    c, r = C.smallest_enclosing_ball([[0, 0, 0], [2.0, 0, 0]])
    np.testing.assert_allclose(c, [1, 0, 0])
    assert r == pytest.approx(1.0)
    X = rng.standard_normal((50, 3))
    c, r = C.smallest_enclosing_ball(X)
    cb, rb = C.brute_force_enclosing_ball(X)
    assert r == pytest.approx(rb, abs=1e-9)
    np.testing.assert_allclose(c, cb, atol=1e-9)
    assert np.all(np.linalg.norm(X - c, axis=1) <= r + 1e-10)


def test_min_norm_point(rng):
    for _ in range(20):
        X = rng.standard_normal((6, 3)) + rng.standard_normal(3) * 2
        x, w = C.min_norm_point(X)
        assert w.min() >= 0 and w.sum() == pytest.approx(1)
        np.testing.assert_allclose(w @ X, x, atol=1e-12)
        # optimality: no point of the set lies strictly below the supporting plane
        assert np.all(X @ x >= x @ x - 1e-10)


def test_certificates(canonical, perturbed):
    for s in canonical.values():
        assert C.cc_certificate(s).passed and C.ic_certificate(s).passed
    s = perturbed[("tetrahedron", 0)]
    cert = C.cc_certificate(s)
    assert not cert.passed
    assert np.linalg.norm(cert.center) > 1e-3


def test_ic_certificate_lp_cross_check(canonical):
    cert = C.ic_certificate(canonical["dodecahedron"])
    assert cert.extra["radius_gap"] == pytest.approx(0, abs=1e-9)
    np.testing.assert_allclose(cert.center, 0, atol=1e-9)


def test_argmax_ties():
    np.testing.assert_array_equal(C.argmax_ties([1.0, 1.0 + 1e-12, 0.5]), [0, 1])
    np.testing.assert_array_equal(C.argmax_ties([1.0, 1.1]), [1])
