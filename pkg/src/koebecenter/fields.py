"""Hyperbolic vector fields whose zeros give centering transformations.

A point ``p`` of the hyperboloid sees every cap plane at distance ``d(p)``
and under the angle ``alpha(p) = arccos(tanh d(p))``.  Feeding these
intrinsic angles to a coefficient functional from :mod:`koebecenter.centers`
and summing the unit normals ``v_i(p)`` toward the planes gives a field
``h`` with ``h(o) = kappa * g(P)`` in the spatial coordinates.  Moving a zero
of ``h`` to the origin therefore centers the polyhedron.

The written-out fields (``field_cm*_verbatim``, ``field_ccm_verbatim``)
evaluate the closed expressions in hyperbolic distances directly and serve
as an independent path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import hypcore as hc
from .centers import (CenterKind, CenterSpec, circumcenter_coefficients, closed_form_numerator,
                      coefficients, simplex_volume)
from .errors import DegeneracyError, DomainError
from .koebe import KoebeCapSystem

COINCIDENCE_TOL = 1e-9
POSITIVE_KINDS = {CenterKind.CM0, CenterKind.CM1, CenterKind.CM2, CenterKind.CM3,
                  CenterKind.TANGENCY}


@dataclass
class FieldEval:
    """A field value at ``base`` with its per-term contributions.

    ``contributions`` maps a term family (``"vertex"``, ``"face"``, ``"edge"``,
    ``"incidence"``) to an array of tangent vectors, one row per term;
    ``total`` is their sum.  ``coefficients`` holds the scalar weights in
    front of the unit normals.
    """

    base: np.ndarray
    total: np.ndarray
    contributions: dict = field(default_factory=dict)
    coefficients: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return float(np.sqrt(max(hc.mdot(self.total, self.total), 0.0)))

    @property
    def spatial(self) -> np.ndarray:
        return self.total[:-1]

    @property
    def min_coefficient(self) -> float:
        vals = [np.min(c) for c in self.coefficients.values() if np.size(c)]
        return float(min(vals)) if vals else np.inf


# ---------------------------------------------------------------------------
# Pointwise geometry


def pole_products(p: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """``<p, s_i>`` for every row of ``poles``."""
    return poles[:, :-1] @ p[:-1] - poles[:, -1] * p[-1]


def in_domain(p: np.ndarray, system_or_poles, margin: float = 0.0) -> bool:
    """``True`` iff ``p`` lies at distance greater than ``margin`` from every cap plane."""
    poles = _all_poles(system_or_poles)
    return bool(np.all(np.arcsinh(-pole_products(p, poles)) > margin))


def _all_poles(obj) -> np.ndarray:
    if isinstance(obj, KoebeCapSystem):
        return np.vstack([obj.vertex_poles, obj.face_poles])
    return np.atleast_2d(np.asarray(obj, dtype=float))


def _normals(p: np.ndarray, poles: np.ndarray):
    """Distances, ``-<p,s>`` and unit normals toward each plane, vectorized."""
    ps = pole_products(p, poles)
    if np.any(ps >= 0):
        k = int(np.argmax(ps))
        raise DomainError(f"point is not in the domain (plane {k} at signed distance {np.arcsinh(-ps[k]):.3g})")
    ch = np.sqrt(1.0 + ps * ps)
    N = (poles + ps[:, None] * p[None, :]) / ch[:, None]
    return -ps, N


def intrinsic_angles(p: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """Angles ``arccos(tanh d)`` under which ``p`` sees the planes; equal to the radii at ``o``."""
    q, _ = _normals(p, poles)
    return np.arctan2(1.0, q)


# ---------------------------------------------------------------------------
# Generic lift


def lift_field(spec: CenterSpec, system: KoebeCapSystem, p: np.ndarray) -> FieldEval:
    """Lift of a smooth center functional to a hyperbolic vector field at ``p``.

    At ``p = o`` the spatial part is ``kappa * g(system)`` with ``kappa`` the
    normalizer of the functional: ``n`` for cm0, ``|E|`` for the tangency
    barycenter, ``2A``, ``3A``, ``4A`` for cm1, cm2, cm3, the total volume for
    ccm and ``1`` for Euler points and mixtures.
    """
    spec = spec if isinstance(spec, CenterSpec) else CenterSpec.parse(spec)
    spec.check_applicable(system.combinatorics)
    p = np.asarray(p, dtype=float)
    qv, Nv = _normals(p, system.vertex_poles)
    qf, Nf = _normals(p, system.face_poles)
    alpha = np.arctan2(1.0, qv)
    beta = np.arctan2(1.0, qf)
    w, W, _ = coefficients(spec, alpha, beta, system.combinatorics)
    if spec.kind in POSITIVE_KINDS:
        used = W if spec.kind in (CenterKind.CM2, CenterKind.CM3) else np.empty(0)
        if np.any(w <= 0) or np.any(used <= 0) or not np.all(np.isfinite(w)):
            raise DegeneracyError("lifted coefficients lost positivity")
    cv = w[:, None] * Nv
    cf = W[:, None] * Nf
    return FieldEval(p, cv.sum(axis=0) + cf.sum(axis=0), {"vertex": cv, "face": cf},
                     {"vertex": w, "face": W})


# ---------------------------------------------------------------------------
# Written-out fields


def field_cm1_verbatim(p: np.ndarray, system: KoebeCapSystem) -> FieldEval:
    """Edge-skeleton field written with hyperbolic distances to the vertex planes."""
    q, N = _normals(np.asarray(p, float), system.vertex_poles)
    a, b = system.combinatorics.edges.T
    sh = q
    ch = np.sqrt(1 + q * q)
    lead = 1 / sh[a] + 1 / sh[b]
    terms = lead[:, None] * ((ch[a] / sh[a])[:, None] * N[a] + (ch[b] / sh[b])[:, None] * N[b])
    return FieldEval(np.asarray(p, float), terms.sum(axis=0), {"edge": terms}, {"edge": lead})


def _incidence_terms(p, system, cube: bool):
    comb = system.combinatorics
    qv, Nv = _normals(p, system.vertex_poles)
    qf, Nf = _normals(p, system.face_poles)
    ii, jj = comb.incidences.T
    shv, shf = qv[ii], qf[jj]
    chv2, chf2 = 1 + shv**2, 1 + shf**2
    chv, chf = np.sqrt(chv2), np.sqrt(chf2)
    if cube:
        lead = shf / (shv * chf2)
    else:
        lead = 1 / (shv * chf)
    den = chf2 + shv**2
    kf = (2 * chf2 + shv**2) / den * (shf / chf)
    kv = (chf2 + 2 * shv**2) / den * (chv / shv)
    terms = lead[:, None] * (kf[:, None] * Nf[jj] + kv[:, None] * Nv[ii])
    return FieldEval(p, terms.sum(axis=0), {"incidence": terms}, {"incidence": lead})


def field_cm2_verbatim(p: np.ndarray, system: KoebeCapSystem) -> FieldEval:
    """Surface field summed over vertex-face incidences."""
    return _incidence_terms(np.asarray(p, float), system, cube=False)


def field_cm3_verbatim(p: np.ndarray, system: KoebeCapSystem) -> FieldEval:
    """Solid field summed over incidences; its zeros are not guaranteed to exist."""
    return _incidence_terms(np.asarray(p, float), system, cube=True)


def field_ccm(p: np.ndarray, system: KoebeCapSystem) -> FieldEval:
    """Circumcenter-of-mass field through intrinsic Gram solves (the normative path)."""
    return lift_field(CenterSpec(CenterKind.CCM), system, p)


def field_ccm_verbatim(p: np.ndarray, system: KoebeCapSystem) -> FieldEval:
    """Circumcenter-of-mass field with the written-out per-face coefficients ``B_s``.

    ``B_a = tanh d_a (tau_b + tau_c) Q_a / sqrt(tau_a tau_b tau_c (sum - prod))``
    with ``tau = csch d`` and ``Q_a`` the numerator polynomial of the closed-form
    circumcenter coefficient.  See :func:`ccm_comparison` for how it relates
    to :func:`field_ccm`.
    """
    CenterSpec(CenterKind.CCM).check_applicable(system.combinatorics)
    p = np.asarray(p, float)
    q, N = _normals(p, system.vertex_poles)
    tri = system.combinatorics.triangles
    tau = 1.0 / q[tri]
    th = q[tri] / np.sqrt(1 + q[tri] ** 2)
    rad = tau.prod(axis=1) * (tau.sum(axis=1) - tau.prod(axis=1))
    if np.any(rad <= 0):
        raise DomainError("point too close to the boundary: simplex radicand is not positive")
    B = np.empty_like(tau)
    for k in range(3):
        ta, tb, tc = tau[:, k], tau[:, (k + 1) % 3], tau[:, (k + 2) % 3]
        B[:, k] = th[:, k] * closed_form_numerator(ta, tb, tc) / np.sqrt(rad)
    terms = B[..., None] * N[tri]
    return FieldEval(p, terms.sum(axis=(0, 1)), {"face": terms.sum(axis=1)}, {"face": B})


def ccm_comparison(p: np.ndarray, system: KoebeCapSystem) -> dict:
    """Compare the written-out and the Gram-solve circumcenter-of-mass fields at ``p``.

    Per face and vertex, the normative weight is ``m_j N_s`` evaluated at the
    intrinsic angles; the report gives the written-out ``B_s`` divided by it
    next to ``24 tanh^2 d_s``, plus the angle between the two totals.
    """
    p = np.asarray(p, float)
    q, _ = _normals(p, system.vertex_poles)
    tri = system.combinatorics.triangles
    alpha = np.arctan2(1.0, q[tri])
    t = np.tan(alpha)
    m = simplex_volume(t[:, 0], t[:, 1], t[:, 2])
    normative = m[:, None] * circumcenter_coefficients(alpha)
    fv = field_ccm_verbatim(p, system)
    fn = field_ccm(p, system)
    ratio = fv.coefficients["face"] / normative
    th = q[tri] / np.sqrt(1 + q[tri] ** 2)
    cosang = _tangent_cos(p, fv.total, fn.total)
    return {
        "term_ratio": ratio,
        "predicted_ratio": 24 * th**2,
        "max_ratio_error": float(np.max(np.abs(ratio - 24 * th**2) / (24 * th**2))),
        "cos_angle_totals": cosang,
        "residual_verbatim": fv.residual,
        "residual_normative": fn.residual,
    }


def _tangent_cos(p, a, b) -> float:
    na = np.sqrt(max(hc.mdot(a, a), 0.0))
    nb = np.sqrt(max(hc.mdot(b, b), 0.0))
    if na == 0 or nb == 0:
        return float("nan")
    return float(hc.mdot(a, b) / (na * nb))


def field_lambda(p: np.ndarray, system: KoebeCapSystem, lam: float) -> FieldEval:
    """``lam * h_cm + (1 - lam) * h_ccm`` with both fields in lifted form.

    At ``o`` this is ``V (12 lam cm3 + (1 - lam) ccm)`` with ``V`` the volume,
    so a zero is the Euler point with parameter ``12 lam / (1 + 11 lam)``;
    see :func:`euler_parameter`.
    """
    if not 0.0 <= lam < 1.0:
        raise DomainError("lambda must lie in [0, 1)")
    CenterSpec(CenterKind.CCM).check_applicable(system.combinatorics)
    a = lift_field(CenterSpec(CenterKind.CM3), system, p)
    b = field_ccm(p, system)
    contrib = {k: lam * a.contributions[k] + (1 - lam) * b.contributions[k] for k in ("vertex", "face")}
    return FieldEval(np.asarray(p, float), lam * a.total + (1 - lam) * b.total, contrib,
                     {"cm3": a.coefficients, "ccm": b.coefficients})


def euler_parameter(lam: float) -> float:
    """Euler-line parameter of the zero of :func:`field_lambda` for mixing weight ``lam``."""
    return 12.0 * lam / (1.0 + 11.0 * lam)


# ---------------------------------------------------------------------------
# Weighted caps on S^d


class WeightKind(str, Enum):
    SEC = "sec"
    TAN = "tan"
    POWSEC = "powsec"


@dataclass(frozen=True)
class WeightFamily:
    """Weight function ``w(t)`` of a cap radius and its hyperbolic counterparts.

    ``f(d) = w(arccos tanh d)`` multiplies the unit normal toward a plane at
    distance ``d``; ``F`` is an antiderivative of ``f``.
    """

    kind: WeightKind = WeightKind.SEC
    k: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", WeightKind(self.kind))
        if self.kind is WeightKind.POWSEC and not self.k >= 1.0:
            raise DomainError("powsec exponent must be at least 1")

    @classmethod
    def parse(cls, text: str) -> "WeightFamily":
        head, _, arg = text.strip().lower().partition(":")
        if head == "powsec":
            return cls(WeightKind.POWSEC, float(arg) if arg else 1.0)
        if arg:
            raise DomainError(f"weight family {head!r} takes no argument")
        return cls(WeightKind(head))

    @property
    def label(self) -> str:
        return f"powsec:{self.k!r}" if self.kind is WeightKind.POWSEC else self.kind.value

    @property
    def exponent(self) -> float:
        return self.k if self.kind is WeightKind.POWSEC else 1.0

    def w(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is WeightKind.TAN:
            return np.tan(t)
        return (1.0 / np.cos(t)) ** self.exponent

    def f(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind is WeightKind.TAN:
            return 1.0 / np.sinh(d)
        return (1.0 / np.tanh(d)) ** self.exponent

    def F(self, d):
        d = np.asarray(d, dtype=float)
        if self.kind is WeightKind.TAN:
            return np.log(np.tanh(0.5 * d))
        if self.exponent == 1.0:
            return np.log(np.sinh(d))
        # no closed form used here: log sinh plus the quadrature of coth^k - coth
        k = self.exponent
        extra = np.vectorize(lambda x: quad(lambda y: np.cosh(y) ** k / np.sinh(y) ** k - 1 / np.tanh(y),
                                            1.0, x, epsabs=1e-13, epsrel=1e-12)[0])(d)
        return np.log(np.sinh(d)) + extra

    @property
    def lim_at_right_angle(self) -> float:
        """``lim w(t) cos t`` as ``t`` tends to ``pi/2``."""
        if self.kind is WeightKind.TAN:
            return 1.0
        return 1.0 if self.exponent == 1.0 else np.inf

    @property
    def lim_at_zero(self) -> float:
        """``lim w(t)`` as ``t`` tends to ``0``."""
        return 0.0 if self.kind is WeightKind.TAN else 1.0


def _weights_list(weights, n: int) -> list[WeightFamily]:
    if isinstance(weights, (WeightFamily, str)):
        weights = [weights] * n
    out = [w if isinstance(w, WeightFamily) else WeightFamily.parse(w) for w in weights]
    if len(out) != n:
        raise DomainError(f"expected {n} weight families, got {len(out)}")
    return out


def _group(weights):
    groups: dict[WeightFamily, list[int]] = {}
    for i, w in enumerate(weights):
        groups.setdefault(w, []).append(i)
    return [(w, np.array(idx)) for w, idx in groups.items()]


def weighted_cap_field(p: np.ndarray, poles, weights) -> FieldEval:
    """``sum_i f_i(d_i(p)) v_i(p)`` for caps given by their poles (any dimension)."""
    poles = _all_poles(poles)
    p = np.asarray(p, float)
    q, N = _normals(p, poles)
    d = np.arcsinh(q)
    coef = np.empty(len(poles))
    for w, idx in _group(_weights_list(weights, len(poles))):
        coef[idx] = w.f(d[idx])
    terms = coef[:, None] * N
    return FieldEval(p, terms.sum(axis=0), {"cap": terms}, {"cap": coef})


def potential(p: np.ndarray, poles, weights) -> float:
    """``sum_i F_i(d_i(p))``; the weighted-cap field is the gradient of its negative."""
    poles = _all_poles(poles)
    d = np.arcsinh(-pole_products(np.asarray(p, float), poles))
    if np.any(d <= 0):
        raise DomainError("point is not in the domain")
    total = 0.0
    for w, idx in _group(_weights_list(weights, len(poles))):
        total += float(np.sum(w.F(d[idx])))
    return total


def weighted_cap_residual(centers: np.ndarray, radii: np.ndarray, weights) -> np.ndarray:
    """``sum_i w_i(rho_i) c_i``, the quantity a centering transformation annihilates."""
    out = np.zeros(centers.shape[1])
    for w, idx in _group(_weights_list(weights, len(radii))):
        out += w.w(radii[idx]) @ centers[idx]
    return out


# ---------------------------------------------------------------------------
# Hypothesis checks


@dataclass
class ConditionCase:
    indices: tuple[int, ...]
    point: np.ndarray | None
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs


@dataclass
class ConditionReport:
    """Outcome of the boundary-coincidence inequality over realized index sets."""

    cases: list[ConditionCase]
    unsupported: list[tuple[int, ...]]
    n: int

    @property
    def failures(self) -> list[ConditionCase]:
        return [c for c in self.cases if not c.holds]

    @property
    def passed(self) -> bool:
        return not self.failures and not self.unsupported

    def message(self) -> str:
        if self.unsupported:
            return f"coincidences of more than three boundaries are not supported: {self.unsupported[0]}"
        if not self.failures:
            return "condition (2) holds"
        c = max(self.failures, key=lambda c: len(c.indices))
        return f"condition (2) fails: |I(q)|={len(c.indices)}, n={self.n}"


def _boundary_points(C: np.ndarray, h: np.ndarray, rng, tol: float):
    """Witness points of ``{u : |u| = 1, C u = h}``; empty list if the set is empty."""
    dim = C.shape[1]
    G = C @ C.T
    if np.linalg.cond(G) > 1e12:
        return []
    x0 = C.T @ np.linalg.solve(G, h)
    r2 = 1.0 - x0 @ x0
    if r2 < -tol:
        return []
    if r2 <= tol:
        return [x0 / np.linalg.norm(x0)]
    _, _, Vt = np.linalg.svd(C)
    null = Vt[len(C):]
    if len(null) == 0:
        return []
    if len(null) == 1:
        dirs = [null[0], -null[0]]
    else:
        g = rng.standard_normal(len(null))
        dirs = [g @ null / np.linalg.norm(g)]
    return [x0 + np.sqrt(r2) * u for u in dirs]


def check_condition(centers, radii, weights, tol: float = COINCIDENCE_TOL, seed: int = 0) -> ConditionReport:
    """Check the boundary-coincidence inequality for caps with the given weights.

    Realized sets ``I(q)`` are enumerated from the empty set, every singleton,
    and the common boundary points of every pair and triple of caps (exact
    points where the intersection is finite, a generic witness otherwise).
    Coincidences of four or more boundaries are listed as unsupported.
    """
    centers = np.atleast_2d(np.asarray(centers, float))
    radii = np.asarray(radii, float)
    n, dim = centers.shape
    W = _weights_list(weights, n)
    lhs_lim = np.array([w.lim_at_right_angle for w in W])
    rhs_lim = np.array([w.lim_at_zero for w in W])
    cos_r = np.cos(radii)
    rng = np.random.default_rng(seed)

    def case(idx, point):
        idx = tuple(sorted(idx))
        mask = np.zeros(n, bool)
        mask[list(idx)] = True
        lhs = float(np.sum(lhs_lim[mask])) if mask.any() else 0.0
        return ConditionCase(idx, point, lhs, float(np.sum(rhs_lim[~mask])))

    seen = {(): case((), None)}
    for i in range(n):
        seen.setdefault((i,), case((i,), None))
    unsupported = []
    for size in (2, 3):
        if size > dim:
            break
        for K in itertools.combinations(range(n), size):
            for q in _boundary_points(centers[list(K)], cos_r[list(K)], rng, tol):
                on = tuple(np.flatnonzero(np.abs(centers @ q - cos_r) <= tol).tolist())
                if len(on) > 3:
                    unsupported.append(on)
                seen.setdefault(on, case(on, q))
    if dim >= 5:
        for K in itertools.combinations(range(n), 4):
            if _boundary_points(centers[list(K)], cos_r[list(K)], rng, tol):
                unsupported.append(K)
    return ConditionReport(list(seen.values()), sorted(set(unsupported)), n)


def check_disconnected(poles, tol: float = COINCIDENCE_TOL) -> bool:
    """``True`` iff the union of the open caps has at least two components.

    Two caps share interior points exactly when their inversive product exceeds
    ``-1``; tangent caps (product ``-1``) do not.
    """
    S = _all_poles(poles)
    G = hc.minkowski_gram(S)
    i, j = np.nonzero(np.triu(G > -1.0 + tol, k=1))
    A = coo_matrix((np.ones(len(i)), (i, j)), shape=(len(S), len(S)))
    k, _ = connected_components(A, directed=False)
    return k >= 2
