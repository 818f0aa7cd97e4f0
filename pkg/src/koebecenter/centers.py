"""Center functionals of Koebe polyhedra.

Every smooth functional is written as ``g(P) = (sum_i w_i v_i + sum_j W_j f_j) / kappa``
with coefficients that depend only on the cap radii.  :func:`coefficients`
returns ``(w, W, kappa)``; the same routine is reused by :mod:`koebecenter.fields`
to build the hyperbolic vector fields.  Brute-force oracles working on the
reconstructed polyhedron live at the bottom of the module.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from .errors import DegeneracyError, DomainError, SpecMismatchError
from .koebe import EuclideanPolyhedron, KoebeCapSystem, KoebeCombinatorics

TIE_RTOL = 1e-9
HULL_TOL = 1e-7
GRAM_COND_MAX = 1e12


class CenterKind(str, Enum):
    CC = "cc"
    IC = "ic"
    CM0 = "cm0"
    CM1 = "cm1"
    CM2 = "cm2"
    CM3 = "cm3"
    CCM = "ccm"
    EULER = "euler"
    TANGENCY = "tangency"
    MIX = "mix"
    WEIGHTED_CAPS = "weighted_caps"


SMOOTH_KINDS = {CenterKind.CM0, CenterKind.CM1, CenterKind.CM2, CenterKind.CM3,
                CenterKind.CCM, CenterKind.EULER, CenterKind.TANGENCY, CenterKind.MIX}
MIXABLE = (CenterKind.CM0, CenterKind.CM1, CenterKind.CM2, CenterKind.CM3, CenterKind.CCM)


@dataclass(frozen=True)
class CenterSpec:
    """Which center to put at the origin.

    ``lam`` is the Euler-line parameter (``lam * cm3 + (1 - lam) * ccm``).
    ``mix`` maps functional names to convex weights for ``MIX``.
    ``weights`` holds a weight family for ``WEIGHTED_CAPS``.
    """

    kind: CenterKind
    lam: float | None = None
    mix: tuple[tuple[str, float], ...] = ()
    weights: object = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CenterKind(self.kind))
        if self.kind is CenterKind.EULER:
            if self.lam is None or not 0.0 <= self.lam < 1.0:
                raise DomainError("euler spec needs lambda in [0, 1)")
        if self.kind is CenterKind.MIX:
            total = sum(w for _, w in self.mix)
            if not self.mix or any(w < 0 for _, w in self.mix) or abs(total - 1.0) > 1e-12:
                raise DomainError("mix weights must be nonnegative and sum to 1")
            names = {CenterKind(k) for k, _ in self.mix}
            if not names <= set(MIXABLE):
                raise DomainError(f"mix accepts only {[k.value for k in MIXABLE]}")

    @classmethod
    def parse(cls, text: str) -> "CenterSpec":
        """Parse ``cm1``, ``euler:0.5`` or ``mix:cm0=0.5,cm2=0.5``."""
        text = text.strip().lower()
        head, _, arg = text.partition(":")
        if head == "euler":
            if not arg:
                raise DomainError("euler spec needs a lambda, e.g. euler:0.5")
            return cls(CenterKind.EULER, lam=float(arg))
        if head == "mix":
            parts = []
            for item in arg.split(","):
                k, _, w = item.partition("=")
                parts.append((k.strip(), float(w)))
            return cls(CenterKind.MIX, mix=tuple(parts))
        if arg:
            raise DomainError(f"spec {head!r} takes no argument")
        return cls(CenterKind(head))

    @property
    def label(self) -> str:
        if self.kind is CenterKind.EULER:
            return f"euler:{self.lam!r}"
        if self.kind is CenterKind.MIX:
            return "mix:" + ",".join(f"{k}={w!r}" for k, w in self.mix)
        return self.kind.value

    @property
    def needs_simplicial(self) -> bool:
        if self.kind in (CenterKind.CCM, CenterKind.EULER):
            return True
        return self.kind is CenterKind.MIX and any(
            CenterKind(k) is CenterKind.CCM and w > 0 for k, w in self.mix)

    @property
    def experimental(self) -> bool:
        """Centering is not guaranteed to exist (center of mass of the solid alone)."""
        if self.kind is CenterKind.CM3:
            return True
        return self.kind is CenterKind.MIX and all(
            CenterKind(k) is CenterKind.CM3 for k, w in self.mix if w > 0)

    def check_applicable(self, comb: KoebeCombinatorics) -> None:
        if self.needs_simplicial and not comb.is_simplicial:
            raise SpecMismatchError(f"{self.label} requires a simplicial polyhedron")


@dataclass
class CenterValue:
    """A center point with its normalizer and coefficient breakdown."""

    point: np.ndarray
    normalizer: float | None = None
    vertex_coeffs: np.ndarray | None = None
    face_coeffs: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.point))


# ---------------------------------------------------------------------------
# Lemma-level formulas


def simplex_volume(ta, tb, tc):
    """Volume of the cone from ``o`` over a triangular face with tangent lengths ``t``."""
    ta, tb, tc = (np.asarray(x, dtype=float) for x in (ta, tb, tc))
    rad = ta * tb * tc * (ta + tb + tc - ta * tb * tc)
    if np.any(ta <= 0) or np.any(tb <= 0) or np.any(tc <= 0) or np.any(rad <= 0):
        raise DomainError("tangent lengths violate t_a + t_b + t_c > t_a t_b t_c")
    return np.sqrt(rad) / 3.0


def cayley_menger_volume(d01, d02, d03, d12, d13, d23) -> float:
    """Tetrahedron volume from its six edge lengths (Cayley-Menger determinant)."""
    sq = np.array([d01, d02, d03, d12, d13, d23], dtype=float) ** 2
    a, b, c, d, e, f = sq
    M = np.array([
        [0, 1, 1, 1, 1],
        [1, 0, a, b, c],
        [1, a, 0, d, e],
        [1, b, d, 0, f],
        [1, c, e, f, 0],
    ])
    v2 = np.linalg.det(M) / 288.0
    if v2 < 0:
        raise DomainError("edge lengths do not form a tetrahedron")
    return float(np.sqrt(v2))


def circumcenter_coefficients(alpha) -> np.ndarray:
    """Coefficients ``N`` with ``p = sum_s N_s v_s`` for the cone circumcenters.

    ``alpha`` is ``(k, 3)`` radii of the three vertex caps of each triangle.
    Solves ``G N = 1 / (2 cos alpha)`` with ``G_rs = cos(alpha_r + alpha_s)``.
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    G = np.cos(alpha[:, :, None] + alpha[:, None, :])
    idx = np.arange(3)
    G[:, idx, idx] = 1.0
    cond = np.linalg.cond(G)
    if np.any(~np.isfinite(cond)) or np.any(cond > GRAM_COND_MAX):
        raise DegeneracyError(f"circumcenter Gram matrix ill-conditioned (cond {np.max(cond):.3g})")
    rhs = 0.5 / np.cos(alpha)
    return np.linalg.solve(G, rhs[..., None])[..., 0]


def circumcenter_closed_form(ta, tb, tc) -> float:
    """Printed closed-form coefficient ``N_a`` (comparison only; see :func:`cc2_discrepancy_report`)."""
    den = 4 * ta * tb * tc * (ta + tb + tc - ta * tb * tc)
    return closed_form_numerator(ta, tb, tc) / den


def closed_form_numerator(ta, tb, tc):
    """Numerator polynomial of :func:`circumcenter_closed_form`."""
    s = tb + tc
    return s * (s * ta**2 + (2 * tb**2 * tc**2 + tb**2 + tc**2) * ta - tb * tc * s)


def cc2_discrepancy_report(system: KoebeCapSystem | None = None, alphas=None) -> list[dict]:
    """Compare the printed circumcenter coefficients with the Gram solve.

    For each triangle ``(a, b, c)`` reports the printed and solved ``N_s``,
    their ratio and ``2 cos(alpha_s)`` (the ratio observed in the symmetric
    case), plus the printed and computed Gram determinants.
    """
    if alphas is None:
        alphas = system.vertex_radii[system.combinatorics.triangles]
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    rows = []
    for tri in alphas:
        t = np.tan(tri)
        N = circumcenter_coefficients(tri[None, :])[0]
        printed = np.array([circumcenter_closed_form(t[k], t[(k + 1) % 3], t[(k + 2) % 3]) for k in range(3)])
        G = np.cos(tri[:, None] + tri[None, :])
        np.fill_diagonal(G, 1.0)
        m = float(simplex_volume(*t))
        rows.append({
            "alpha": tri.tolist(),
            "N_gram": N.tolist(),
            "N_printed": printed.tolist(),
            "ratio": (printed / N).tolist(),
            "two_cos_alpha": (2 * np.cos(tri)).tolist(),
            "det_gram": float(np.linalg.det(G)),
            "det_printed": float(36 * m**2 * np.prod(1 + t**2)),
            "det_36m2_over_prod": float(36 * m**2 / np.prod(1 + t**2)),
        })
    return rows


# ---------------------------------------------------------------------------
# Coefficient functionals


def _accumulate(n, idx, vals):
    return np.bincount(idx, weights=vals, minlength=n)


def _trapezoid_terms(alpha, beta, comb):
    ii, jj = comb.incidences.T
    T = np.tan(alpha[ii])
    S = np.sin(beta[jj])
    area = T * S
    den = T * T + S * S
    kf = (2 * T * T + S * S) / den
    kv = (T * T + 2 * S * S) / den
    return ii, jj, area, kf * np.cos(beta[jj]), kv / np.cos(alpha[ii])


def coefficients(spec: CenterSpec, alpha, beta, comb: KoebeCombinatorics):
    """Vertex coefficients, face coefficients and normalizer of a smooth functional.

    Satisfies ``g(P) = (w @ v + W @ f) / kappa`` for the polyhedron with vertex
    radii ``alpha``, face radii ``beta`` and the given combinatorics.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n, m = comb.n_vertices, comb.n_faces
    kind = spec.kind
    zf = np.zeros(m)
    if kind is CenterKind.CM0:
        return 1.0 / np.cos(alpha), zf, float(n)
    if kind is CenterKind.TANGENCY:
        a, b = comb.edges.T
        s = np.sin(alpha[a] + alpha[b])
        w = _accumulate(n, a, np.sin(alpha[b]) / s) + _accumulate(n, b, np.sin(alpha[a]) / s)
        return w, zf, float(len(comb.edges))
    if kind is CenterKind.CM1:
        a, b = comb.edges.T
        L = np.tan(alpha[a]) + np.tan(alpha[b])
        w = _accumulate(n, a, L / np.cos(alpha[a])) + _accumulate(n, b, L / np.cos(alpha[b]))
        return w, zf, 2.0 * float(L.sum())
    if kind in (CenterKind.CM2, CenterKind.CM3):
        ii, jj, area, cf, cv = _trapezoid_terms(alpha, beta, comb)
        if kind is CenterKind.CM3:
            area = area * np.cos(beta[jj])
            k = 4.0
        else:
            k = 3.0
        return _accumulate(n, ii, area * cv), _accumulate(m, jj, area * cf), k * float(area.sum())
    if kind is CenterKind.CCM:
        spec.check_applicable(comb)
        tri = comb.triangles
        t = np.tan(alpha[tri])
        vol = simplex_volume(t[:, 0], t[:, 1], t[:, 2])
        N = circumcenter_coefficients(alpha[tri])
        w = _accumulate(n, tri.ravel(), (vol[:, None] * N).ravel())
        return w, zf, float(vol.sum())
    if kind is CenterKind.EULER:
        spec.check_applicable(comb)
        parts = (((CenterKind.CM3, spec.lam)), (CenterKind.CCM, 1.0 - spec.lam))
        return _combine(parts, alpha, beta, comb)
    if kind is CenterKind.MIX:
        spec.check_applicable(comb)
        return _combine([(CenterKind(k), w) for k, w in spec.mix], alpha, beta, comb)
    raise SpecMismatchError(f"{kind.value} has no smooth coefficient representation")


def _combine(parts, alpha, beta, comb):
    w = np.zeros(comb.n_vertices)
    W = np.zeros(comb.n_faces)
    for kind, lam in parts:
        if lam == 0:
            continue
        wk, Wk, kk = coefficients(CenterSpec(kind), alpha, beta, comb)
        w += lam * wk / kk
        W += lam * Wk / kk
    return w, W, 1.0


def evaluate(spec: CenterSpec, system: KoebeCapSystem) -> CenterValue:
    """Value of a smooth center functional on a cap system."""
    spec.check_applicable(system.combinatorics)
    w, W, kappa = coefficients(spec, system.vertex_radii, system.face_radii, system.combinatorics)
    g = (w @ system.vertex_centers + W @ system.face_centers) / kappa
    return CenterValue(g, kappa, w, W)


def cm0(system: KoebeCapSystem) -> CenterValue:
    """Barycenter of the vertices."""
    return evaluate(CenterSpec(CenterKind.CM0), system)


def cm1(system: KoebeCapSystem) -> CenterValue:
    """Center of mass of the edge skeleton; normalizer ``2A`` with ``A`` the total edge length."""
    return evaluate(CenterSpec(CenterKind.CM1), system)


def cm2(system: KoebeCapSystem) -> CenterValue:
    """Center of mass of the surface; normalizer ``3A`` with ``A`` the surface area."""
    return evaluate(CenterSpec(CenterKind.CM2), system)


def cm3(system: KoebeCapSystem) -> CenterValue:
    """Center of mass of the solid; normalizer ``4A`` with ``A = 3 * volume``."""
    return evaluate(CenterSpec(CenterKind.CM3), system)


def ccm(system: KoebeCapSystem) -> CenterValue:
    """Circumcenter of mass with respect to the sphere center; normalizer is the volume."""
    return evaluate(CenterSpec(CenterKind.CCM), system)


def euler_point(system: KoebeCapSystem, lam: float) -> CenterValue:
    """``lam * cm3 + (1 - lam) * ccm`` for ``lam`` in ``[0, 1)``."""
    if not 0.0 <= lam < 1.0:
        raise DomainError("lambda must lie in [0, 1)")
    return evaluate(CenterSpec(CenterKind.EULER, lam=lam), system)


def tangency_barycenter(system: KoebeCapSystem) -> CenterValue:
    """Barycenter of the edge tangency points."""
    return evaluate(CenterSpec(CenterKind.TANGENCY), system)


def cone_circumcenter(system: KoebeCapSystem, j: int) -> np.ndarray:
    """Circumcenter of the cone from ``o`` over triangular face ``j``."""
    face = system.faces[j]
    if len(face) != 3:
        raise SpecMismatchError(f"face {j} is not a triangle")
    idx = list(face)
    N = circumcenter_coefficients(system.vertex_radii[idx][None, :])[0]
    return N @ system.vertex_centers[idx]


# ---------------------------------------------------------------------------
# Minimax centers: smallest enclosing ball and hull certificates


def _circumball(P: np.ndarray):
    if len(P) == 0:
        return np.zeros(3), -1.0
    if len(P) == 1:
        return P[0].copy(), 0.0
    A = P[1:] - P[0]
    G = A @ A.T
    lam = np.linalg.lstsq(G, 0.5 * np.diag(G), rcond=None)[0]
    c = P[0] + lam @ A
    return c, float(np.linalg.norm(P - c, axis=1).max())


def smallest_enclosing_ball(points, seed: int = 0):
    """Minimal enclosing ball ``(center, radius)`` by Welzl's move-to-front scheme."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(P) == 0:
        raise DomainError("need at least one point")
    order = np.random.default_rng(seed).permutation(len(P))
    P = P[order]
    dim = P.shape[1]
    scale = max(1.0, np.abs(P).max())

    def inside(ball, x):
        c, r = ball
        return r >= 0 and np.linalg.norm(x - c) <= r + 1e-12 * scale

    def mtf(n, support):
        ball = _circumball(np.array(support).reshape(-1, dim))
        if len(support) == dim + 1:
            return ball
        for i in range(n):
            if not inside(ball, P[i]):
                ball = mtf(i, support + [P[i]])
        return ball

    c, r = mtf(len(P), [])
    return c, r


def min_norm_point(points, tol: float = 1e-14):
    """Point of smallest norm in the convex hull of ``points`` (Wolfe's algorithm).

    Returns ``(x, weights)`` with ``x = weights @ points``.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    k = len(P)
    scale = max(1.0, float(np.max(np.sum(P * P, axis=1))))
    S = [int(np.argmin(np.sum(P * P, axis=1)))]
    lam = np.array([1.0])
    x = P[S[0]].copy()
    for _ in range(50 * k + 50):
        j = int(np.argmin(P @ x))
        if x @ x - P[j] @ x <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[S]
            K = len(S)
            A = np.zeros((K + 1, K + 1))
            A[:K, :K] = Q @ Q.T
            A[:K, K] = A[K, :K] = 1.0
            rhs = np.zeros(K + 1)
            rhs[K] = 1.0
            mu = np.linalg.lstsq(A, rhs, rcond=None)[0][:K]
            if np.all(mu > tol):
                lam = mu
                break
            mask = mu < lam
            theta = min(1.0, float(np.min(lam[mask] / (lam[mask] - mu[mask])))) if mask.any() else 1.0
            lam = lam + theta * (mu - lam)
            keep = lam > tol
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    w = np.zeros(k)
    w[S] = lam
    return x, w


def hull_distance(points) -> float:
    """Euclidean distance from the origin to the convex hull of ``points``."""
    x, _ = min_norm_point(points)
    return float(np.linalg.norm(x))


def argmax_ties(values, rtol: float = TIE_RTOL) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    top = values.max()
    return np.flatnonzero(values >= top - rtol * max(abs(top), 1.0))


@dataclass
class Certificate:
    """Outcome of a cc/ic optimality check at the origin."""

    which: str
    active: list[int]
    hull_distance: float
    passed: bool
    center: np.ndarray
    radius: float
    extra: dict = field(default_factory=dict)


def cc_certificate(system: KoebeCapSystem, tol: float = HULL_TOL) -> Certificate:
    """Is ``o`` the center of the smallest ball containing the polyhedron?

    Holds iff ``o`` lies in the hull of the vertex-cap centers of largest radius.
    The smallest enclosing ball of the vertices is reported as a cross-check.
    """
    return cc_certificate_caps(system.vertex_centers, system.vertex_radii, tol)


def cc_certificate_caps(centers, radii, tol: float = HULL_TOL) -> Certificate:
    """:func:`cc_certificate` from the vertex caps alone."""
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    active = argmax_ties(radii)
    dist = hull_distance(centers[active])
    c, r = smallest_enclosing_ball(centers / np.cos(radii)[:, None])
    return Certificate("cc", active.tolist(), dist, dist <= tol, c, r)


def largest_inscribed_ball(face_centers, face_radii):
    """Chebyshev center ``(center, radius)`` of ``{x : <f_j, x> <= cos beta_j}`` by linear programming."""
    nrm = np.asarray(face_centers, float)
    off = np.cos(np.asarray(face_radii, float))
    k = nrm.shape[1]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A = np.hstack([nrm, np.ones((len(nrm), 1))])
    res = linprog(c, A_ub=A, b_ub=off, bounds=[(None, None)] * k + [(0, None)], method="highs")
    if not res.success:
        raise DegeneracyError(f"inscribed ball LP failed: {res.message}")
    return res.x[:k], float(res.x[-1])


def ic_certificate(system: KoebeCapSystem, tol: float = HULL_TOL) -> Certificate:
    """Is ``o`` the center of a largest ball inside the polyhedron?

    Holds iff ``o`` lies in the hull of the face-cap centers of largest radius.
    The LP inscribed radius is compared with ``min cos(beta)`` as a cross-check.
    """
    return ic_certificate_caps(system.face_centers, system.face_radii, tol)


def ic_certificate_caps(centers, radii, tol: float = HULL_TOL) -> Certificate:
    """:func:`ic_certificate` from the face caps alone."""
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    active = argmax_ties(radii)
    dist = hull_distance(centers[active])
    c, r = largest_inscribed_ball(centers, radii)
    r0 = float(np.cos(radii).min())
    return Certificate("ic", active.tolist(), dist, dist <= tol, c, r,
                       {"radius_at_origin": r0, "radius_gap": r - r0})


# ---------------------------------------------------------------------------
# Brute-force oracles on the reconstructed polyhedron


def vertex_centroid(poly: EuclideanPolyhedron) -> np.ndarray:
    return poly.vertices.mean(axis=0)


def wire_centroid(poly: EuclideanPolyhedron):
    """Centroid and total length of the edge skeleton."""
    a, b = poly.edges.T
    L = poly.edge_lengths
    mid = 0.5 * (poly.vertices[a] + poly.vertices[b])
    return L @ mid / L.sum(), float(L.sum())


def _fan_triangles(poly: EuclideanPolyhedron) -> np.ndarray:
    tris = []
    for f in poly.faces:
        for k in range(1, len(f) - 1):
            tris.append((f[0], f[k], f[k + 1]))
    return poly.vertices[np.array(tris)]


def surface_centroid(poly: EuclideanPolyhedron):
    """Centroid and area of the boundary surface from a fan triangulation of each face."""
    T = _fan_triangles(poly)
    area = 0.5 * np.linalg.norm(np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]), axis=1)
    return area @ T.mean(axis=1) / area.sum(), float(area.sum())


def solid_centroid(poly: EuclideanPolyhedron):
    """Centroid and volume of the solid from tetrahedra with apex ``o``."""
    T = _fan_triangles(poly)
    vol = np.einsum("ij,ij->i", T[:, 0], np.cross(T[:, 1], T[:, 2])) / 6.0
    return vol @ (T.sum(axis=1) / 4.0) / vol.sum(), float(vol.sum())


def circumcenter_of_mass_oracle(poly: EuclideanPolyhedron):
    """Circumcenter of mass from explicit tetrahedra ``(o, a, b, c)``.

    Each circumcenter solves ``2 <p, x> = |x|^2`` for the three face vertices.
    Returns ``(ccm, total volume)``.
    """
    tris = poly.vertices[np.array(poly.faces)]
    vol = np.einsum("ij,ij->i", tris[:, 0], np.cross(tris[:, 1], tris[:, 2])) / 6.0
    rhs = 0.5 * np.sum(tris * tris, axis=2)
    cc = np.linalg.solve(tris, rhs[..., None])[..., 0]
    return vol @ cc / vol.sum(), float(vol.sum())


def brute_force_enclosing_ball(points):
    """Exhaustive minimal enclosing ball over support sets of size at most 4."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    best = (None, np.inf)
    for k in range(1, min(4, len(P)) + 1):
        for sub in itertools.combinations(range(len(P)), k):
            c, r = _circumball(P[list(sub)])
            if r < best[1] and np.all(np.linalg.norm(P - c, axis=1) <= r * (1 + 1e-12) + 1e-12):
                best = (c, r)
    return best
