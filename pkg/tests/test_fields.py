import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koebecenter import centers as C
from koebecenter import fields as F
from koebecenter import hypcore as hc
from koebecenter import koebe
from koebecenter.errors import DomainError, OrientationError

O = hc.origin(2)
EXACT = {"cm0": "n", "tangency": "E", "cm1": 2, "cm2": 3, "cm3": 4}


def kappa(text, system):
    k = EXACT[text]
    if k == "n":
        return system.combinatorics.n_vertices
    if k == "E":
        return len(system.combinatorics.edges)
    return C.evaluate(C.CenterSpec.parse(text), system).normalizer


def random_point(system, rng, max_dist=1.5, margin=0.05):
    while True:
        v = np.append(rng.standard_normal(3), 0.0)
        p = hc.geodesic_exp(O, v, rng.uniform(0, max_dist))
        if F.in_domain(p, system, margin):
            return p


def close(a, b, rel=1e-10):
    scale = max(1.0, np.linalg.norm(a), np.linalg.norm(b))
    np.testing.assert_allclose(a, b, atol=rel * scale, rtol=0)


def test_lift_at_origin_is_kappa_times_center(perturbed):
    for s in perturbed.values():
        for text in EXACT:
            spec = C.CenterSpec.parse(text)
            h = F.lift_field(spec, s, O)
            g = C.evaluate(spec, s).point
            np.testing.assert_allclose(h.spatial, kappa(text, s) * g, atol=1e-9)
            assert abs(h.total[-1]) < 1e-12


def test_tetra_cm1_kappa_is_twice_length(perturbed):
    s = perturbed[("tetrahedron", 1)]
    P = koebe.reconstruct(s)
    h = F.lift_field(C.CenterSpec.parse("cm1"), s, O)
    np.testing.assert_allclose(h.spatial, 2 * P.edge_lengths.sum() * C.wire_centroid(P)[0], atol=1e-9)


def test_canonical_zero(canonical):
    for name, s in canonical.items():
        specs = list(EXACT) + (["ccm", "euler:0.5"] if s.combinatorics.is_simplicial else [])
        for text in specs:
            assert F.lift_field(C.CenterSpec.parse(text), s, O).residual < 1e-10, (name, text)
        assert F.field_cm1_verbatim(O, s).residual < 1e-10
        assert F.field_cm2_verbatim(O, s).residual < 1e-10
        assert F.field_cm3_verbatim(O, s).residual < 1e-10
    assert F.field_ccm_verbatim(O, canonical["octahedron"]).residual < 1e-10
    assert F.field_lambda(O, canonical["tetrahedron"], 0.5).residual < 1e-10


def test_verbatim_matches_lift(perturbed, rng):
    pairs = 0
    items = list(perturbed.values())
    while pairs < 100:
        s = items[pairs % len(items)]
        p = random_point(s, rng)
        for text, fn in (("cm1", F.field_cm1_verbatim), ("cm2", F.field_cm2_verbatim),
                         ("cm3", F.field_cm3_verbatim)):
            close(fn(p, s).total, F.lift_field(C.CenterSpec.parse(text), s, p).total)
        pairs += 1


def test_verbatim_coefficients_at_origin(perturbed):
    s = perturbed[("cube", 0)]
    a, b = s.vertex_radii, s.face_radii
    ii, jj = s.combinatorics.incidences.T
    e0, e1 = s.combinatorics.edges.T
    lead1 = F.field_cm1_verbatim(O, s).coefficients["edge"]
    np.testing.assert_allclose(lead1, np.tan(a[e0]) + np.tan(a[e1]), rtol=1e-12)
    lead2 = F.field_cm2_verbatim(O, s).coefficients["incidence"]
    np.testing.assert_allclose(lead2, np.tan(a[ii]) * np.sin(b[jj]), rtol=1e-12)
    lead3 = F.field_cm3_verbatim(O, s).coefficients["incidence"]
    np.testing.assert_allclose(lead3, np.tan(a[ii]) * np.sin(b[jj]) * np.cos(b[jj]), rtol=1e-12)
    # Remark identities at o: csch d = tan alpha, coth d = sec alpha
    d = hc.plane_distance(O, s.vertex_poles)
    np.testing.assert_allclose(1 / np.sinh(d), np.tan(a), rtol=1e-12)
    np.testing.assert_allclose(1 / np.tanh(d), 1 / np.cos(a), rtol=1e-12)


def test_cm3_verbatim_at_origin_is_four_A_cm3(perturbed):
    s = perturbed[("octahedron", 2)]
    P = koebe.reconstruct(s)
    g, vol = C.solid_centroid(P)
    np.testing.assert_allclose(F.field_cm3_verbatim(O, s).spatial, 12 * vol * g, atol=1e-9)


def test_equivariance_under_isometries(perturbed, rng):
    items = list(perturbed.items())
    checked, k = 0, 0
    while checked < 100:
        (name, _), s = items[k % len(items)]
        U = hc.random_mobius(1000 + k, 0.8)
        k += 1
        p = random_point(s, rng, max_dist=1.0)
        try:
            Us = koebe.perturb(s, U)
        except OrientationError:
            # the image has a cap of radius >= pi/2: o left the domain
            continue
        Up = hc.apply_point(U, p)
        checked += 1
        for text in ("cm1", "cm2", "tangency") + (("ccm",) if s.combinatorics.is_simplicial else ()):
            spec = C.CenterSpec.parse(text)
            close(U @ F.lift_field(spec, s, p).total, F.lift_field(spec, Us, Up).total, rel=1e-9)


def test_direction_consistency(perturbed, rng):
    items = list(perturbed.values())
    for k in range(100):
        s = items[k % len(items)]
        p = random_point(s, rng)
        B = hc.boost_to_origin(p)
        moved = koebe.perturb(s, B)
        for text in EXACT:
            spec = C.CenterSpec.parse(text)
            push = (B @ F.lift_field(spec, s, p).total)[:-1]
            g = C.evaluate(spec, moved).point
            ng = np.linalg.norm(g)
            if ng < 1e-8:
                continue
            cosang = push @ g / (np.linalg.norm(push) * ng)
            assert cosang > 0
            assert np.arccos(min(1.0, cosang)) < 1e-6


def test_fieldeval_contributions_sum(perturbed, rng):
    s = perturbed[("icosahedron", 0)]
    p = random_point(s, rng)
    for h in (F.lift_field(C.CenterSpec.parse("cm2"), s, p), F.field_cm2_verbatim(p, s),
              F.field_cm1_verbatim(p, s), F.field_ccm(p, s), F.field_lambda(p, s, 0.3)):
        total = sum(c.sum(axis=0) if c.ndim == 2 else c.sum(axis=(0, 1)) for c in h.contributions.values())
        np.testing.assert_allclose(h.total, total, atol=1e-12 * max(1, np.abs(h.total).max()))
        assert h.residual >= 0


def test_positivity_on_domain(perturbed, rng):
    for s in perturbed.values():
        for _ in range(5):
            p = random_point(s, rng, max_dist=2.0, margin=1e-3)
            for text in EXACT:
                h = F.lift_field(C.CenterSpec.parse(text), s, p)
                assert h.coefficients["vertex"].min() > 0
                if text in ("cm2", "cm3"):
                    assert h.coefficients["face"].min() > 0
                else:
                    assert not h.coefficients["face"].any()


def test_domain_error(canonical):
    s = canonical["tetrahedron"]
    far = hc.geodesic_exp(O, np.append(s.vertex_centers[0], 0.0), 4.0)
    assert not F.in_domain(far, s)
    with pytest.raises(DomainError):
        F.lift_field(C.CenterSpec.parse("cm0"), s, far)
    with pytest.raises(DomainError):
        F.field_cm1_verbatim(far, s)


def test_ccm_lift_at_origin(perturbed):
    s = perturbed[("octahedron", 0)]
    h = F.field_ccm(O, s)
    val = C.ccm(s)
    P = koebe.reconstruct(s)
    g, vol = C.circumcenter_of_mass_oracle(P)
    np.testing.assert_allclose(h.spatial, val.normalizer * val.point, atol=1e-9)
    assert h.spatial @ (vol * g) > 0
    cosang = h.spatial @ g / (np.linalg.norm(h.spatial) * np.linalg.norm(g))
    assert 1 - cosang < 1e-8


def test_ccm_comparison_ratio(perturbed, rng):
    for name in ("tetrahedron", "octahedron", "icosahedron"):
        s = perturbed[(name, 1)]
        for _ in range(5):
            rep = F.ccm_comparison(random_point(s, rng), s)
            assert rep["max_ratio_error"] < 1e-10
            assert rep["residual_verbatim"] > 0


def test_field_lambda(perturbed, rng):
    s = perturbed[("octahedron", 1)]
    p = random_point(s, rng)
    np.testing.assert_array_equal(F.field_lambda(p, s, 0.0).total, F.field_ccm(p, s).total)
    a, b = F.field_lambda(p, s, 0.0).total, F.field_lambda(p, s, 0.9).total
    for lam in (0.1, 0.37, 0.6):
        np.testing.assert_allclose(F.field_lambda(p, s, lam).total, a + lam / 0.9 * (b - a), atol=1e-12 * np.abs(b).max())
    with pytest.raises(DomainError):
        F.field_lambda(p, s, 1.0)


def test_field_lambda_at_origin_is_euler_point(perturbed):
    s = perturbed[("icosahedron", 2)]
    vol = C.ccm(s).normalizer
    for lam in (0.0, 0.2, 0.5, 0.8):
        h = F.field_lambda(O, s, lam)
        mu = F.euler_parameter(lam)
        np.testing.assert_allclose(h.spatial / (vol * (1 + 11 * lam)), C.euler_point(s, mu).point, atol=1e-9)


def test_weighted_field_sec_at_origin(perturbed):
    s = perturbed[("dodecahedron", 0)]
    h = F.weighted_cap_field(O, s.vertex_poles, "sec")
    np.testing.assert_allclose(h.spatial, s.combinatorics.n_vertices * C.cm0(s).point, atol=1e-9)


def test_weighted_field_antipodal_zero():
    poles = hc.caps_to_poles([[0, 0, 1], [0, 0, -1]], [0.4, 0.4])
    for w in ("sec", "tan", "powsec:2"):
        assert F.weighted_cap_field(O, poles, w).residual < 1e-14


def test_tan_coefficient_is_csch(rng):
    C_ = rng.standard_normal((5, 4))
    C_ /= np.linalg.norm(C_, axis=1, keepdims=True)
    poles = hc.caps_to_poles(C_, rng.uniform(0.05, 0.3, 5))
    p = hc.origin(3)
    h = F.weighted_cap_field(p, poles, "tan")
    d = hc.plane_distance(p, poles)
    np.testing.assert_allclose(h.coefficients["cap"], 1 / np.sinh(d), rtol=1e-12)


def test_potential_single_cap():
    pole = hc.caps_to_poles([[1.0, 0, 0]], [0.7])
    d = float(hc.plane_distance(O, pole[0]))
    assert F.potential(O, pole, "sec") == pytest.approx(np.log(np.sinh(d)), rel=1e-14)
    assert F.potential(O, pole, "tan") == pytest.approx(np.log(np.tanh(d / 2)), rel=1e-14)


def _fd_check(p, poles, weights, e, h=1e-5):
    fp = F.potential(hc.geodesic_exp(p, e, h), poles, weights)
    fm = F.potential(hc.geodesic_exp(p, -e, h), poles, weights)
    return -(fp - fm) / (2 * h)


def test_potential_gradient_matches_field(perturbed, rng):
    items = list(perturbed.values())
    worst = 0.0
    for k in range(100):
        s = items[k % len(items)]
        p = random_point(s, rng, max_dist=1.0)
        weights = ["sec", "tan"][k % 2]
        poles = s.vertex_poles
        f = F.weighted_cap_field(p, poles, weights).total
        e = hc.project_tangent(p, np.append(rng.standard_normal(3), rng.standard_normal()))
        e = e / np.sqrt(hc.mdot(e, e))
        comp = hc.mdot(f, e)
        fd = _fd_check(p, poles, weights, e)
        worst = max(worst, abs(fd - comp) / np.sqrt(hc.mdot(f, f)))
    assert worst < 1e-5


def test_potential_gradient_powsec(canonical, rng):
    s = canonical["cube"]
    p = random_point(s, rng, max_dist=0.5)
    f = F.weighted_cap_field(p, s.vertex_poles, "powsec:2").total
    for _ in range(3):
        e = hc.project_tangent(p, np.append(rng.standard_normal(3), 0.0))
        e = e / np.sqrt(hc.mdot(e, e))
        fd = _fd_check(p, s.vertex_poles, "powsec:2", e)
        assert abs(fd - hc.mdot(f, e)) < 1e-5 * np.sqrt(hc.mdot(f, f))


@given(st.floats(0.01, 8.0))
@settings(max_examples=100)
def test_weight_family_identities(d):
    for text in ("sec", "tan", "powsec:1.5"):
        w = F.WeightFamily.parse(text)
        t = np.arccos(np.tanh(d))
        assert w.f(d) == pytest.approx(w.w(t), rel=1e-9)
        assert w.w(t) > 0


def test_weight_family_parse():
    assert F.WeightFamily.parse("powsec:3").exponent == 3
    assert F.WeightFamily.parse("POWSEC:2").label == "powsec:2.0"
    with pytest.raises(DomainError):
        F.WeightFamily.parse("powsec:0.5")
    with pytest.raises(DomainError):
        F.WeightFamily.parse("sec:2")
    with pytest.raises(ValueError):
        F.WeightFamily.parse("cosh")


def test_condition_tetra_fails(canonical):
    s = canonical["tetrahedron"]
    rep = F.check_condition(s.vertex_centers, s.vertex_radii, "sec")
    assert not rep.passed
    assert rep.message() == "condition (2) fails: |I(q)|=2, n=4"
    assert max(len(c.indices) for c in rep.cases) == 2


def test_condition_cube_passes(canonical):
    s = canonical["cube"]
    rep = F.check_condition(s.vertex_centers, s.vertex_radii, "sec")
    assert rep.passed
    pair = [c for c in rep.cases if len(c.indices) == 2]
    assert pair and all(c.lhs == 2 and c.rhs == 6 for c in pair)
    empty = [c for c in rep.cases if not c.indices][0]
    assert empty.lhs == 0 < empty.rhs


def test_condition_six_caps_in_three_dimensions():
    centers = np.vstack([np.eye(4)[:3], -np.eye(4)[:3]])
    rep = F.check_condition(centers, np.full(6, 0.3), "sec")
    assert rep.passed


def test_condition_tan_fails_on_empty_set(canonical):
    s = canonical["cube"]
    rep = F.check_condition(s.vertex_centers, s.vertex_radii, "tan")
    assert not rep.passed
    assert any(not c.indices for c in rep.failures)


def test_condition_powsec_above_one_fails(canonical):
    s = canonical["cube"]
    assert not F.check_condition(s.vertex_centers, s.vertex_radii, "powsec:2").passed


def test_disconnected(canonical):
    s = canonical["icosahedron"]
    assert F.check_disconnected(s.vertex_poles)
    band = hc.caps_to_poles([[0, 0, 1], [0, 1, 0]], [1.2, 1.2])
    assert not F.check_disconnected(band)
    apart = hc.caps_to_poles([[0, 0, 1], [0, 0, -1]], [0.5, 0.5])
    assert F.check_disconnected(apart)
