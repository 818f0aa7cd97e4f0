r"""Hyperboloid model of hyperbolic space :math:`\mathbb{H}^{d+1}`.

Points, plane poles and tangent vectors are plain ``numpy`` arrays of length
``d + 2`` whose **last** entry is the time coordinate.  The bilinear form is

.. math:: \langle x, y\rangle = x_0 y_0 + \dots + x_d y_d - x_{d+1} y_{d+1}.

A spherical cap on :math:`S^d` with center ``c`` and radius ``rho`` is encoded
by its pole ``(c, cos rho) / sin rho``; the cap is the set of unit vectors
``u`` with ``<(u, 1), pole> >= 0`` and the matching closed hyperbolic half
space is ``{x : <x, pole> >= 0}``.  Poles therefore point away from the
region containing the origin, and :func:`plane_distance` is positive on that
region.

Lorentz maps are ``(d+2, d+2)`` matrices acting on column vectors.  The
Poincare ball appears only as a chart (:func:`ball_chart`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DomainError, OrientationError

ON_PLANE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SphericalCap:
    """Closed spherical cap on the unit sphere, radius in ``(0, pi/2)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise DomainError("cap center must be a vector in R^(d+1)")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise DomainError(f"cap center must be a unit vector, |c| = {np.linalg.norm(c)!r}")
        r = float(self.radius)
        if not 0.0 < r < np.pi / 2:
            raise DomainError(f"cap radius {r!r} outside (0, pi/2)")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        """Dimension ``d`` of the sphere :math:`S^d` carrying the cap."""
        return self.center.size - 1

    def __repr__(self) -> str:
        return f"SphericalCap(center={self.center.tolist()!r}, radius={self.radius!r})"


# ---------------------------------------------------------------------------
# Minkowski form


def mdot(x, y):
    """Minkowski product of the last axes of ``x`` and ``y`` (broadcasting)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(x[..., :-1] * y[..., :-1], axis=-1) - x[..., -1] * y[..., -1]


def minkowski_gram(S):
    """Matrix of pairwise Minkowski products of the rows of ``S``."""
    S = np.asarray(S, dtype=float)
    return S[:, :-1] @ S[:, :-1].T - np.outer(S[:, -1], S[:, -1])


def form(dim: int) -> np.ndarray:
    """The diagonal matrix ``J = diag(1, ..., 1, -1)`` of size ``dim + 2``."""
    J = np.eye(dim + 2)
    J[-1, -1] = -1.0
    return J


def origin(dim: int = 2) -> np.ndarray:
    """The point ``o`` (center of the ball model) of :math:`\\mathbb{H}^{dim+1}`."""
    o = np.zeros(dim + 2)
    o[-1] = 1.0
    return o


def renormalize_point(p) -> np.ndarray:
    """Project a time-like future vector back onto the hyperboloid."""
    p = np.asarray(p, dtype=float)
    n2 = -mdot(p, p)
    if np.any(n2 <= 0) or np.any(p[..., -1] <= 0):
        raise DomainError("vector is not future time-like")
    return p / np.sqrt(n2)[..., None]


def normalize_spacelike(s) -> np.ndarray:
    """Scale space-like vectors to unit Minkowski norm."""
    s = np.asarray(s, dtype=float)
    n2 = mdot(s, s)
    if np.any(n2 <= 0):
        raise DomainError("vector is not space-like")
    return s / np.sqrt(n2)[..., None]


def check_point(p, tol: float = 1e-10) -> np.ndarray:
    """Return ``p`` as an array after checking it lies on the upper sheet."""
    p = np.asarray(p, dtype=float)
    if abs(mdot(p, p) + 1.0) > tol * max(1.0, p[-1] ** 2) or p[-1] <= 0:
        raise DomainError("not a point of the hyperboloid")
    return p


def distance(p, q):
    """Hyperbolic distance between points ``p`` and ``q``.

    Uses ``2 arsinh(|p - q| / 2)`` with the Minkowski norm of the difference,
    which stays accurate for nearby points where ``arccosh`` loses half the digits.
    """
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(mdot(diff, diff), 0.0)))


# ---------------------------------------------------------------------------
# Caps and poles


def caps_to_poles(centers, radii) -> np.ndarray:
    """Vectorised :func:`cap_to_pole` for arrays of centers and radii."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0) or np.any(radii >= np.pi / 2):
        raise DomainError("cap radius outside (0, pi/2)")
    s = np.sin(radii)[:, None]
    return np.hstack([centers, np.cos(radii)[:, None]]) / s


def cap_to_pole(cap: SphericalCap) -> np.ndarray:
    """Unit space-like pole ``(center, cos r) / sin r`` of a cap."""
    return caps_to_poles(cap.center[None, :], [cap.radius])[0]


def poles_to_caps(S) -> tuple[np.ndarray, np.ndarray]:
    """Centers and radii of the caps whose poles are the rows of ``S``.

    Rows are renormalised first.  A non-positive time component means the cap
    radius is at least pi/2, which violates the orientation convention.
    """
    S = normalize_spacelike(np.atleast_2d(S))
    if np.any(S[:, -1] <= 0):
        raise OrientationError("pole with time <= 0: cap radius >= pi/2")
    x = S[:, :-1]
    nx = np.linalg.norm(x, axis=1)
    return x / nx[:, None], np.arctan2(1.0, S[:, -1])


def pole_to_cap(s) -> SphericalCap:
    """Inverse of :func:`cap_to_pole`."""
    c, r = poles_to_caps(np.asarray(s, dtype=float)[None, :])
    return SphericalCap(c[0], float(r[0]))


def inversive_product(cap_a: SphericalCap, cap_b: SphericalCap) -> float:
    """Minkowski product of two cap poles: -1 for external tangency, 0 if orthogonal."""
    return float(mdot(cap_to_pole(cap_a), cap_to_pole(cap_b)))


# ---------------------------------------------------------------------------
# Points, planes and tangent vectors


def plane_distance(p, s):
    """Signed distance from ``p`` to the plane with pole ``s``.

    Equals ``arsinh(-<p, s>)``; positive on the side of the plane that
    does not belong to the cap's half space.  Broadcasts over ``s``.
    """
    return np.arcsinh(-mdot(p, s))


def unit_normal_toward(p, s) -> np.ndarray:
    """Unit tangent vector at ``p`` along the perpendicular toward the plane ``s``.

    Broadcasts over rows of ``s``.  At the origin the spatial part equals the
    cap center.
    """
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    ps = mdot(p, s)
    if np.any(np.abs(ps) <= ON_PLANE_TOL):
        raise DomainError("point lies on the plane; normal direction undefined")
    w = s + ps[..., None] * p
    return w / np.sqrt(1.0 + ps**2)[..., None]


def ideal_direction(p, u) -> np.ndarray:
    """Unit tangent vector at ``p`` pointing to the ideal point ``u`` of :math:`S^d`."""
    p = np.asarray(p, dtype=float)
    ell = np.append(np.asarray(u, dtype=float), 1.0)
    pl = mdot(p, ell)
    return (ell + pl * p) / abs(pl)


def project_tangent(p, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the tangent space at ``p``."""
    return v + mdot(p, v) * np.asarray(p)


def geodesic_exp(p, v, s: float) -> np.ndarray:
    """Point at distance ``s`` from ``p`` along the unit direction ``v``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n2 = mdot(v, v)
    if n2 <= 0:
        raise DomainError("tangent vector must be space-like and nonzero")
    v = v / np.sqrt(n2)
    return renormalize_point(np.cosh(s) * p + np.sinh(s) * v)


def ball_chart(p) -> np.ndarray:
    """Poincare ball coordinates ``x / (1 + t)`` of a point."""
    p = np.asarray(p, dtype=float)
    return p[..., :-1] / (1.0 + p[..., -1:])


def ball_chart_inverse(b) -> np.ndarray:
    """Point of the hyperboloid with Poincare ball coordinates ``b``."""
    b = np.asarray(b, dtype=float)
    r2 = np.sum(b * b, axis=-1, keepdims=True)
    if np.any(r2 >= 1.0):
        raise DomainError("ball coordinates must lie in the open unit ball")
    return np.concatenate([2.0 * b, 1.0 + r2], axis=-1) / (1.0 - r2)


def ball_chart_pushforward(p, v) -> np.ndarray:
    """Derivative of the ball chart at ``p`` applied to the tangent vector ``v``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    t = p[-1]
    return v[:-1] / (1.0 + t) - p[:-1] * v[-1] / (1.0 + t) ** 2


def ball_chart_pullback(b, db) -> np.ndarray:
    """Tangent vector at ``ball_chart_inverse(b)`` with chart velocity ``db``."""
    b = np.asarray(b, dtype=float)
    db = np.asarray(db, dtype=float)
    r2 = b @ b
    k = 1.0 - r2
    dr2 = 2.0 * (b @ db)
    dx = (2.0 * db * k + 2.0 * b * dr2) / k**2
    dt = (dr2 * k + (1.0 + r2) * dr2) / k**2
    return np.append(dx, dt)


# ---------------------------------------------------------------------------
# Lorentz maps


def lorentz_inverse(M) -> np.ndarray:
    """Inverse ``J M^T J`` of a Lorentz matrix."""
    M = np.asarray(M, dtype=float)
    J = form(M.shape[0] - 2)
    return J @ M.T @ J


def is_lorentz(M, tol: float = 1e-10) -> bool:
    """Whether ``M`` preserves the form and the future cone."""
    M = np.asarray(M, dtype=float)
    J = form(M.shape[0] - 2)
    scale = max(1.0, np.abs(M).max() ** 2)
    return bool(np.abs(M.T @ J @ M - J).max() <= tol * scale and M[-1, -1] >= 1.0 - tol)


def boost_from_origin(p) -> np.ndarray:
    """The pure boost taking ``o`` to ``p``."""
    p = np.asarray(p, dtype=float)
    x, t = p[:-1], p[-1]
    k = x.size
    M = np.empty((k + 1, k + 1))
    M[:k, :k] = np.eye(k) + np.outer(x, x) / (1.0 + t)
    M[:k, k] = x
    M[k, :k] = x
    M[k, k] = t
    return M


def boost_to_origin(p) -> np.ndarray:
    """The unique pure boost (no rotation part) taking ``p`` to ``o``."""
    p = np.asarray(p, dtype=float)
    M = boost_from_origin(p)
    M[:-1, -1] *= -1.0
    M[-1, :-1] *= -1.0
    return M


def rotation_map(R) -> np.ndarray:
    """Lorentz map acting by the orthogonal matrix ``R`` on the spatial part."""
    R = np.asarray(R, dtype=float)
    k = R.shape[0]
    M = np.eye(k + 1)
    M[:k, :k] = R
    return M


def boost_along(direction, rapidity: float) -> np.ndarray:
    """Pure boost moving ``o`` a distance ``rapidity`` toward the ideal point ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    return boost_from_origin(np.append(np.sinh(rapidity) * u, np.cosh(rapidity)))


def hyperbolic_translation(q_attract, q_repel, rapidity: float) -> np.ndarray:
    """Translation by ``rapidity`` along the geodesic from ``q_repel`` to ``q_attract``.

    Both arguments are ideal points (unit vectors); the map fixes them and
    moves every point of the axis a distance ``rapidity`` toward ``q_attract``.
    """
    la = np.append(np.asarray(q_attract, dtype=float), 1.0)
    lr = np.append(np.asarray(q_repel, dtype=float), 1.0)
    J = form(la.size - 2)
    c = mdot(la, lr)
    if abs(c) < 1e-14:
        raise DegeneracyError("ideal endpoints coincide")
    # x -> x + (e^r - 1) la <lr, x>/<lr, la> + (e^-r - 1) lr <la, x>/<la, lr>
    return (
        np.eye(la.size)
        + (np.exp(rapidity) - 1.0) * np.outer(la, J @ lr) / c
        + (np.exp(-rapidity) - 1.0) * np.outer(lr, J @ la) / c
    )


def apply_poles(T, S) -> np.ndarray:
    """Apply a Lorentz map to the rows of ``S`` and renormalise them."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    return normalize_spacelike(S @ np.asarray(T, dtype=float).T)


def apply_cap(T, cap: SphericalCap) -> SphericalCap:
    """Image of a cap under the Mobius map induced by ``T``."""
    return pole_to_cap(apply_poles(T, cap_to_pole(cap)[None, :])[0])


def apply_point(T, p) -> np.ndarray:
    """Image of a point under ``T`` with renormalisation."""
    return renormalize_point(np.asarray(T, dtype=float) @ np.asarray(p, dtype=float))


def random_rotation(rng: np.random.Generator, k: int) -> np.ndarray:
    """Haar-random element of SO(k)."""
    A = rng.standard_normal((k, k))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_mobius(seed, max_rapidity: float, dim: int = 2) -> np.ndarray:
    """Deterministic random Lorentz map: boost after a uniform rotation.

    The boost direction is uniform on the sphere and the rapidity uniform in
    ``[0, max_rapidity]``.
    """
    if max_rapidity < 0:
        raise DomainError("max_rapidity must be >= 0")
    rng = np.random.default_rng(seed)
    R = rotation_map(random_rotation(rng, dim + 1))
    u = rng.standard_normal(dim + 1)
    r = rng.uniform(0.0, max_rapidity) if max_rapidity > 0 else 0.0
    return boost_along(u, r) @ R


# ---------------------------------------------------------------------------
# Half-plane model cross-check


def halfplane_check(a: float, t: float, r: float | None = None):
    """Distances and direction components in the Poincare half plane.

    For the point ``(a, t)`` returns ``(dist_axis, dist_circle, y_u, y_v)``:
    distances to the ``y``-axis and to the geodesic ``|z| = r``, and the
    ``y``-components of the Euclidean unit tangents of the perpendiculars to
    them (pointing toward the respective line).  With ``r`` omitted the circle
    quantities are ``nan``.
    """
    if a <= 0 or t <= 0:
        raise DomainError("a and t must be positive")
    dist_axis = np.arcsinh(a / t)
    y_u = a / np.hypot(a, t)
    if r is None or r == 0:
        return dist_axis, np.nan, y_u, np.nan
    if r < 0 or r >= np.hypot(a, t):
        raise DomainError("circle radius must satisfy 0 < r < sqrt(a^2 + t^2)")
    dist_circle = np.arcsinh((t * t + a * a - r * r) / (2.0 * r * t))
    y_v = -(t * t + r * r - a * a) / np.sqrt((r * r + a * a + t * t) ** 2 - 4.0 * r * r * a * a)
    return dist_axis, dist_circle, y_u, y_v


def halfplane_to_hyperboloid(x: float, y: float) -> np.ndarray:
    """Embed the half-plane point ``x + iy`` into the hyperboloid of :math:`\\mathbb{H}^2`."""
    r2 = x * x + y * y
    return np.array([x / y, (r2 - 1.0) / (2.0 * y), (r2 + 1.0) / (2.0 * y)])


def hyperboloid_to_halfplane(p) -> np.ndarray:
    """Inverse of :func:`halfplane_to_hyperboloid`."""
    p = np.asarray(p, dtype=float)
    y = 1.0 / (p[2] - p[1])
    return np.array([p[0] * y, y])
