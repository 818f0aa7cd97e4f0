"""Koebe cap systems: combinatorics, validation, reconstruction and fixtures.

A Koebe polyhedron is stored by its vertex caps ``(v_i, alpha_i)`` and face
caps ``(f_j, beta_j)`` on the unit sphere together with the face cycles.  The
polyhedron itself is recovered with :func:`reconstruct`: vertex ``i`` sits at
``v_i / cos(alpha_i)`` and face ``j`` has incenter ``cos(beta_j) f_j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

from . import hypcore as hc
from .errors import CombinatoricsError, DegeneracyError, DomainError, InvalidSystemError

DEFAULT_TOL = 1e-8
SOLIDS = ("tetrahedron", "cube", "octahedron", "icosahedron", "dodecahedron")


@dataclass(frozen=True, eq=False)
class KoebeCombinatorics:
    """Face cycles plus derived edges, incidences and adjacency maps.

    Attributes derived from ``faces``:

    ``edges``
        ``(E, 2)`` sorted vertex pairs, lexicographically ordered.
    ``edge_faces``
        ``(E, 2)`` the two faces containing each edge.
    ``incidences``
        ``(I, 2)`` vertex-face pairs ``(i, j)``.
    ``incidence_edges``
        ``(I, 2)`` indices of the two edges of face ``j`` meeting at vertex ``i``.
    """

    n_vertices: int
    faces: tuple[tuple[int, ...], ...]
    edges: np.ndarray = field(init=False, repr=False)
    edge_faces: np.ndarray = field(init=False, repr=False)
    incidences: np.ndarray = field(init=False, repr=False)
    incidence_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = int(self.n_vertices)
        faces = tuple(tuple(int(i) for i in f) for f in self.faces)
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "faces", faces)
        edge_map: dict[tuple[int, int], list[int]] = {}
        for j, f in enumerate(faces):
            if len(f) < 3:
                raise CombinatoricsError(f"face {j} has fewer than 3 vertices")
            if len(set(f)) != len(f):
                raise CombinatoricsError(f"face {j} repeats a vertex")
            for a, b in zip(f, f[1:] + f[:1]):
                if not (0 <= a < n and 0 <= b < n):
                    raise CombinatoricsError(f"face {j} has a vertex index out of range")
                edge_map.setdefault((min(a, b), max(a, b)), []).append(j)
        for e, fs in edge_map.items():
            if len(fs) != 2:
                raise CombinatoricsError(f"non-manifold edge {e}: lies in {len(fs)} faces")
        used = {i for f in faces for i in f}
        if len(used) != n:
            raise CombinatoricsError("some vertices lie on no face")
        edges = sorted(edge_map)
        m = len(faces)
        if n - len(edges) + m != 2:
            raise CombinatoricsError(f"Euler relation violated: {n} - {len(edges)} + {m} != 2")
        index = {e: k for k, e in enumerate(edges)}
        inc, inc_edges = [], []
        for j, f in enumerate(faces):
            for pos, i in enumerate(f):
                prev, nxt = f[pos - 1], f[(pos + 1) % len(f)]
                inc.append((i, j))
                inc_edges.append((index[(min(prev, i), max(prev, i))], index[(min(i, nxt), max(i, nxt))]))
        for name, value in (
            ("edges", np.array(edges, dtype=int).reshape(-1, 2)),
            ("edge_faces", np.array([edge_map[e] for e in edges], dtype=int).reshape(-1, 2)),
            ("incidences", np.array(inc, dtype=int).reshape(-1, 2)),
            ("incidence_edges", np.array(inc_edges, dtype=int).reshape(-1, 2)),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def is_simplicial(self) -> bool:
        return all(len(f) == 3 for f in self.faces)

    @cached_property
    def triangles(self) -> np.ndarray:
        """``(m, 3)`` face array; only defined for simplicial combinatorics."""
        if not self.is_simplicial:
            raise CombinatoricsError("combinatorics is not simplicial")
        return np.array(self.faces, dtype=int)

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        nb: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edges:
            nb[a].add(int(b))
            nb[b].add(int(a))
        return tuple(frozenset(s) for s in nb)


def derive_combinatorics(faces, n_vertices: int | None = None) -> KoebeCombinatorics:
    """Build :class:`KoebeCombinatorics` from face cycles."""
    faces = [list(f) for f in faces]
    if n_vertices is None:
        n_vertices = 1 + max(max(f) for f in faces)
    return KoebeCombinatorics(n_vertices, faces)


@dataclass(frozen=True, eq=False)
class KoebeCapSystem:
    """Vertex caps, face caps and combinatorics of a Koebe polyhedron."""

    vertex_centers: np.ndarray
    vertex_radii: np.ndarray
    face_centers: np.ndarray
    face_radii: np.ndarray
    combinatorics: KoebeCombinatorics
    name: str = ""

    def __post_init__(self) -> None:
        vc = np.array(self.vertex_centers, dtype=float, ndmin=2)
        vr = np.array(self.vertex_radii, dtype=float, ndmin=1)
        fc = np.array(self.face_centers, dtype=float, ndmin=2)
        fr = np.array(self.face_radii, dtype=float, ndmin=1)
        comb = self.combinatorics
        if vc.shape != (comb.n_vertices, 3) or vr.shape != (comb.n_vertices,):
            raise InvalidSystemError("vertex cap arrays do not match the combinatorics")
        if fc.shape != (comb.n_faces, 3) or fr.shape != (comb.n_faces,):
            raise InvalidSystemError("face cap arrays do not match the combinatorics")
        for a in (vc, vr, fc, fr):
            a.setflags(write=False)
        object.__setattr__(self, "vertex_centers", vc)
        object.__setattr__(self, "vertex_radii", vr)
        object.__setattr__(self, "face_centers", fc)
        object.__setattr__(self, "face_radii", fr)

    @classmethod
    def from_caps(cls, vertex_caps, face_caps, faces, name: str = "") -> "KoebeCapSystem":
        comb = derive_combinatorics(faces, len(vertex_caps))
        return cls(
            np.array([c.center for c in vertex_caps]),
            np.array([c.radius for c in vertex_caps]),
            np.array([c.center for c in face_caps]),
            np.array([c.radius for c in face_caps]),
            comb,
            name,
        )

    @classmethod
    def from_poles(cls, vertex_poles, face_poles, combinatorics, name: str = "") -> "KoebeCapSystem":
        vc, vr = hc.poles_to_caps(vertex_poles)
        fc, fr = hc.poles_to_caps(face_poles)
        return cls(vc, vr, fc, fr, combinatorics, name)

    @property
    def n(self) -> int:
        return self.combinatorics.n_vertices

    @property
    def m(self) -> int:
        return self.combinatorics.n_faces

    @property
    def faces(self):
        return self.combinatorics.faces

    @property
    def vertex_caps(self) -> list[hc.SphericalCap]:
        return [hc.SphericalCap(c, r) for c, r in zip(self.vertex_centers, self.vertex_radii)]

    @property
    def face_caps(self) -> list[hc.SphericalCap]:
        return [hc.SphericalCap(c, r) for c, r in zip(self.face_centers, self.face_radii)]

    @cached_property
    def vertex_poles(self) -> np.ndarray:
        return hc.caps_to_poles(self.vertex_centers, self.vertex_radii)

    @cached_property
    def face_poles(self) -> np.ndarray:
        return hc.caps_to_poles(self.face_centers, self.face_radii)

    def transformed(self, T) -> "KoebeCapSystem":
        """Image of the system under the Lorentz map ``T``."""
        return KoebeCapSystem.from_poles(
            hc.apply_poles(T, self.vertex_poles),
            hc.apply_poles(T, self.face_poles),
            self.combinatorics,
            self.name,
        )


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    """Worst residual of each check.

    ``radius_bound`` and ``separation`` are strict inequalities measured with a
    built-in margin of ``tol`` and must be exactly zero; the other checks pass
    when their residual is at most ``tol``.
    """

    tol: float
    radius_bound: float
    edge_tangency: float
    incidence_orthogonality: float
    tangency_coincidence: float
    separation: float

    @property
    def checks(self) -> dict[str, float]:
        return {
            "radius_bound": self.radius_bound,
            "edge_tangency": self.edge_tangency,
            "incidence_orthogonality": self.incidence_orthogonality,
            "tangency_coincidence": self.tangency_coincidence,
            "separation": self.separation,
        }

    @property
    def failures(self) -> list[str]:
        # radius_bound and separation already include the margin tol; any positive value fails
        strict = {"radius_bound", "separation"}
        return [k for k, v in self.checks.items() if not v <= (0.0 if k in strict else self.tol)]

    @property
    def passed(self) -> bool:
        return not self.failures


def tangent_point_of_poles(s1, s2) -> np.ndarray:
    """Common boundary point of two externally tangent caps given by their poles."""
    ell = np.asarray(s1) + np.asarray(s2)
    u = ell[..., :-1] / ell[..., -1:]
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def validate(system: KoebeCapSystem, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check radii, tangency, orthogonality, tangency coincidence and separation.

    Separation residual: non-adjacent vertex caps (and non-adjacent face caps)
    must have pole product below ``-1``; a vertex cap and a non-incident face
    cap must have ``|product| > 1``.  The reported value is the worst amount by
    which a pair misses that margin plus ``tol`` (0 when all pairs clear it).
    """
    comb = system.combinatorics
    radii = np.concatenate([system.vertex_radii, system.face_radii])
    radius_res = float(max(0.0, -radii.min(), (radii - np.pi / 2).max() + tol))
    Sv, Sf = system.vertex_poles, system.face_poles
    Gvv = hc.minkowski_gram(Sv)
    Gff = hc.minkowski_gram(Sf)
    Gvf = Sv[:, :-1] @ Sf[:, :-1].T - np.outer(Sv[:, -1], Sf[:, -1])
    ei, ej = comb.edges.T
    fk, fl = comb.edge_faces.T
    tangency = max(np.abs(Gvv[ei, ej] + 1.0).max(), np.abs(Gff[fk, fl] + 1.0).max())
    ii, jj = comb.incidences.T
    ortho = np.abs(Gvf[ii, jj]).max()
    tv = tangent_point_of_poles(Sv[ei], Sv[ej])
    tf = tangent_point_of_poles(Sf[fk], Sf[fl])
    coincidence = np.linalg.norm(tv - tf, axis=1).max()

    adj_v = np.eye(system.n, dtype=bool)
    adj_v[ei, ej] = adj_v[ej, ei] = True
    adj_f = np.eye(system.m, dtype=bool)
    adj_f[fk, fl] = adj_f[fl, fk] = True
    inc = np.zeros((system.n, system.m), dtype=bool)
    inc[ii, jj] = True
    gaps = [np.array([0.0])]
    if (~adj_v).any():
        gaps.append(Gvv[~adj_v] + 1.0 + tol)
    if (~adj_f).any():
        gaps.append(Gff[~adj_f] + 1.0 + tol)
    if (~inc).any():
        gaps.append(1.0 + tol - np.abs(Gvf[~inc]))
    separation = float(max(0.0, np.concatenate(gaps).max()))
    return ValidationReport(tol, radius_res, float(tangency), float(ortho), float(coincidence), separation)


def require_valid(system: KoebeCapSystem, tol: float = DEFAULT_TOL) -> ValidationReport:
    report = validate(system, tol)
    if not report.passed:
        raise InvalidSystemError(f"cap system fails validation: {report.failures} ({report.checks})")
    return report


# ---------------------------------------------------------------------------
# Euclidean reconstruction


@dataclass(frozen=True, eq=False)
class EuclideanPolyhedron:
    """Midscribed polyhedron recovered from a cap system."""

    vertices: np.ndarray
    face_incenters: np.ndarray
    tangency_points: np.ndarray
    trapezoids: np.ndarray
    combinatorics: KoebeCombinatorics

    @property
    def faces(self):
        return self.combinatorics.faces

    @property
    def edges(self) -> np.ndarray:
        return self.combinatorics.edges

    @property
    def edge_lengths(self) -> np.ndarray:
        a, b = self.edges.T
        return np.linalg.norm(self.vertices[a] - self.vertices[b], axis=1)


def _edge_feet(P, edges) -> np.ndarray:
    a, b = P[edges[:, 0]], P[edges[:, 1]]
    d = b - a
    t = -np.sum(a * d, axis=1) / np.sum(d * d, axis=1)
    return a + t[:, None] * d


def reconstruct(system: KoebeCapSystem, tol: float = DEFAULT_TOL) -> EuclideanPolyhedron:
    """Vertices, face incenters, edge tangency points and trapezoids.

    The trapezoid of incidence ``(i, j)`` is ``(vertex i, e1, incenter j, e2)``
    where ``e1``, ``e2`` are the tangency points of the two edges of face ``j``
    at vertex ``i``.
    """
    require_valid(system, tol)
    comb = system.combinatorics
    P = system.vertex_centers / np.cos(system.vertex_radii)[:, None]
    C = system.face_centers * np.cos(system.face_radii)[:, None]
    T = _edge_feet(P, comb.edges)
    ii, jj = comb.incidences.T
    e1, e2 = comb.incidence_edges.T
    Q = np.stack([P[ii], T[e1], C[jj], T[e2]], axis=1)
    for a in (P, C, T, Q):
        a.setflags(write=False)
    return EuclideanPolyhedron(P, C, T, Q, comb)


def tangency_point(system: KoebeCapSystem, edge) -> np.ndarray:
    """Point where the edge ``{i, j}`` touches the unit sphere."""
    i, j = sorted(int(k) for k in edge)
    comb = system.combinatorics
    hits = np.flatnonzero((comb.edges[:, 0] == i) & (comb.edges[:, 1] == j))
    if hits.size == 0:
        raise CombinatoricsError(f"{{{i}, {j}}} is not an edge")
    P = system.vertex_centers / np.cos(system.vertex_radii)[:, None]
    return _edge_feet(P, np.array([[i, j]]))[0]


# ---------------------------------------------------------------------------
# Generators


def _platonic_points(name: str) -> np.ndarray:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    if name == "tetrahedron":
        return np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    if name == "cube":
        return np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
    if name == "octahedron":
        return np.vstack([np.eye(3), -np.eye(3)])
    if name == "icosahedron":
        pts = []
        for s1, s2 in itertools.product((-1.0, 1.0), repeat=2):
            pts += [[0, s1, s2 * phi], [s1, s2 * phi, 0], [s2 * phi, 0, s1]]
        return np.array(pts)
    if name == "dodecahedron":
        pts = [list(p) for p in itertools.product((-1.0, 1.0), repeat=3)]
        for s1, s2 in itertools.product((-1.0, 1.0), repeat=2):
            pts += [[0, s1 / phi, s2 * phi], [s1 / phi, s2 * phi, 0], [s2 * phi, 0, s1 / phi]]
        return np.array(pts)
    raise DomainError(f"unknown solid {name!r}; expected one of {SOLIDS}")


def hull_faces(points) -> list[list[int]]:
    """Outward-oriented face cycles of the convex hull, coplanar facets merged."""
    points = np.asarray(points, dtype=float)
    hull = ConvexHull(points)
    groups: dict[tuple, set[int]] = {}
    normals: dict[tuple, np.ndarray] = {}
    for simplex, eq in zip(hull.simplices, hull.equations):
        key = tuple(np.round(eq, 9))
        groups.setdefault(key, set()).update(int(i) for i in simplex)
        normals[key] = eq[:3]
    faces = []
    for key, idx in groups.items():
        idx = sorted(idx)
        nrm = normals[key]
        c = points[idx].mean(axis=0)
        e1 = points[idx[0]] - c
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(nrm, e1)
        ang = [np.arctan2((points[i] - c) @ e2, (points[i] - c) @ e1) for i in idx]
        faces.append([idx[k] for k in np.argsort(ang)])
    faces.sort(key=lambda f: (min(f), f))
    return faces


def system_from_polyhedron(vertices, faces, name: str = "") -> KoebeCapSystem:
    """Cap system of a polyhedron whose edges are all tangent to the unit sphere."""
    P = np.asarray(vertices, dtype=float)
    R = np.linalg.norm(P, axis=1)
    if np.any(R <= 1.0):
        raise DomainError("vertices must lie outside the unit sphere")
    fc, fr = [], []
    for f in faces:
        pts = P[list(f)]
        nrm = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        nrm /= np.linalg.norm(nrm)
        h = nrm @ pts[0]
        if h <= 0:
            raise DomainError("faces must be oriented outward around the origin")
        fc.append(nrm)
        fr.append(np.arccos(h))
    return KoebeCapSystem(P / R[:, None], np.arccos(1.0 / R), np.array(fc), np.array(fr),
                          derive_combinatorics(faces, len(P)), name)


def generate_canonical(name: str) -> KoebeCapSystem:
    """Regular solid midscribed to the unit sphere with tangency barycenter at ``o``.

    Radii follow from scaling the standard coordinates so that edge midpoints
    lie on the unit sphere.
    """
    name = name.lower()
    pts = _platonic_points(name)
    faces = hull_faces(pts)
    comb = derive_combinatorics(faces, len(pts))
    mids = 0.5 * (pts[comb.edges[:, 0]] + pts[comb.edges[:, 1]])
    pts = pts / np.linalg.norm(mids, axis=1).mean()
    system = system_from_polyhedron(pts, faces, name)
    require_valid(system, 1e-10)
    return system


def perturb(system: KoebeCapSystem, T) -> KoebeCapSystem:
    """Apply the Mobius transformation induced by ``T`` to every cap."""
    return system.transformed(T)


def random_perturbation(system: KoebeCapSystem, seed: int, max_rapidity: float,
                        max_tries: int = 1000) -> tuple[KoebeCapSystem, np.ndarray]:
    """Image of ``system`` under a seeded random Mobius map that keeps every radius below pi/2.

    Draws ``random_mobius((seed, k), max_rapidity)`` for ``k = 0, 1, ...`` and
    returns the first image that is a valid cap system, with its map.
    """
    dim = system.vertex_centers.shape[1] - 1
    for k in range(max_tries):
        T = hc.random_mobius((seed, k), max_rapidity, dim)
        S = np.vstack([system.vertex_poles, system.face_poles]) @ T.T
        if np.all(S[:, -1] > 1e-6):
            return system.transformed(T), T
    raise DegeneracyError(f"no admissible perturbation within {max_tries} draws")


# ---------------------------------------------------------------------------
# Drift construction


@dataclass
class DriftDiagnostics:
    vertex: int
    step: float
    rapidity: float
    critical_rapidity: float
    ideal_point: np.ndarray
    clearance: float
    alpha_i: float
    max_other_radius: float
    cm0_norm: float
    transform: np.ndarray


def _cap_clearance(q, centers, radii):
    ang = np.arccos(np.clip(centers @ q, -1.0, 1.0))
    return ang - radii


def _fibonacci_sphere(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    z = 1.0 - 2.0 * i / k
    th = np.pi * (1.0 + np.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def drift_ideal_point(system: KoebeCapSystem, i: int) -> tuple[np.ndarray, float]:
    """Ideal point exterior to every vertex cap with the largest clearance.

    Clearance is the minimum spherical distance to all vertex caps, cap ``i``
    included, so the point stays strictly away from the circle of cap ``i``.
    Near-ties are broken toward larger distance from cap ``i``.
    Returns ``(q, clearance)``.
    """
    V, a = system.vertex_centers, system.vertex_radii

    def score(q):
        q = q / np.linalg.norm(q)
        cl = _cap_clearance(q, V, a)
        return -(cl.min() + 1e-6 * cl[i])

    cands = _fibonacci_sphere(4000)
    vals = np.array([score(q) for q in cands])
    best_q, best_v = None, np.inf
    for k in np.argsort(vals, kind="stable")[:8]:
        res = minimize(score, cands[k], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if res.fun < best_v - 1e-12:
            best_q, best_v = res.x / np.linalg.norm(res.x), res.fun
    clearance = float(_cap_clearance(best_q, V, a).min())
    if clearance <= 0:
        raise DomainError("vertex caps leave no exterior point")
    return best_q, clearance


def _crossing_rapidity(T_of, poles) -> float:
    # time component of T_r s is c0 + c1 e^r + c2 e^-r; smallest r > 0 where it vanishes
    best = np.inf
    for s in poles:
        c0, c1, c2 = T_of(s)
        roots = np.roots([c1, c0, c2]) if abs(c1) > 0 else np.array([-c2 / c0]) if c0 else []
        for x in np.atleast_1d(roots):
            if abs(np.imag(x)) < 1e-14 and np.real(x) > 1.0:
                best = min(best, float(np.log(np.real(x))))
    return best


def drift_construction(system: KoebeCapSystem, i: int, step: float):
    """Translate along the perpendicular to plane ``V_i`` so that ``V_i`` nears ``o``.

    ``q`` is chosen by :func:`drift_ideal_point`; the translation axis is the
    geodesic through ``q`` orthogonal to ``V_i`` and points flow toward ``q``.
    The rapidity is ``r_c (1 - exp(-step))`` where ``r_c`` is the rapidity at
    which the first cap would reach radius pi/2, so every ``step >= 0``
    yields a valid system and ``alpha_i`` tends to pi/2 as ``step`` grows.
    Returns ``(system, DriftDiagnostics)``.
    """
    if step < 0:
        raise DomainError("step must be >= 0")
    if not 0 <= i < system.n:
        raise DomainError(f"vertex index {i} out of range")
    q, clearance = drift_ideal_point(system, i)
    s = system.vertex_poles[i]
    lq = np.append(q, 1.0)
    lr = lq - 2.0 * hc.mdot(lq, s) * s
    q_rep = lr[:-1] / lr[-1]
    la, lb = lq, lr / lr[-1]
    c = hc.mdot(la, lb)

    def coeffs(p):
        return (p[-1] - la[-1] * hc.mdot(lb, p) / c - lb[-1] * hc.mdot(la, p) / c,
                la[-1] * hc.mdot(lb, p) / c, lb[-1] * hc.mdot(la, p) / c)

    r_crit = _crossing_rapidity(coeffs, np.vstack([system.vertex_poles, system.face_poles]))
    rapidity = r_crit * (1.0 - np.exp(-step)) if np.isfinite(r_crit) else step
    T = hc.hyperbolic_translation(q, q_rep, rapidity)
    out = system.transformed(T)
    P = out.vertex_centers / np.cos(out.vertex_radii)[:, None]
    diag = DriftDiagnostics(
        vertex=i, step=float(step), rapidity=float(rapidity), critical_rapidity=float(r_crit),
        ideal_point=q, clearance=clearance, alpha_i=float(out.vertex_radii[i]),
        max_other_radius=float(np.delete(out.vertex_radii, i).max()),
        cm0_norm=float(np.linalg.norm(P.mean(axis=0))), transform=T,
    )
    return out, diag
