"""Finding centering transformations.

``solve`` looks for a point ``p`` in the domain ``D`` (all plane distances
positive) such that the pure boost taking ``p`` to ``o`` centers the
system.  It runs damped Newton on the residual ``g(boost(p) P)`` in ball
coordinates of a chart recentred at every iterate, and falls back to
geodesic steps against the lifted field when Newton stalls.

``solve_minimax`` handles the two non-smooth centers (smallest enclosing
ball, largest inscribed ball) by maximizing the smallest plane distance.
``trace_curve`` integrates the lifted field with an adaptive embedded
Runge-Kutta scheme and classifies where the curve ends.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import hypcore as hc
from .centers import (CenterKind, CenterSpec, cc_certificate_caps, coefficients,
                      ic_certificate_caps)
from .errors import DegeneracyError, DomainError, KoebeError, SpecMismatchError
from .fields import (WeightFamily, check_condition, check_disconnected, lift_field,
                     potential, weighted_cap_field, weighted_cap_residual)
from .koebe import KoebeCapSystem, require_valid


# Newton keeps iterating below the tolerance while it still makes progress
POLISH = 1e-4
# one step may shrink the distance to the nearest plane by at most this factor
BARRIER = 0.25
# a method is stalled when the residual has not halved over this many steps
STALL_WINDOW = 12


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    BOUNDARY_ESCAPE = "BoundaryEscape"
    CONDITION_VIOLATED = "ConditionViolated"
    NOT_SUPPORTED = "NotSupported"


class Method(str, Enum):
    AUTO = "auto"
    NEWTON = "newton"
    FLOW = "flow"


@dataclass(frozen=True)
class SolveOptions:
    tol_residual: float = 1e-8
    tol_step: float = 1e-12
    max_iter: int = 200
    method: Method = Method.AUTO
    boundary_margin: float = 1e-6
    seed: int = 0
    fd_step: float = 1e-6
    trust_radius: float = 0.5
    validate_tol: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        if self.tol_residual <= 0 or self.tol_step <= 0 or self.boundary_margin <= 0:
            raise DomainError("tolerances must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


@dataclass
class SolveReport:
    """Outcome of a centering solve.

    ``transform`` is the pure boost taking ``point`` to ``o``; applying it to
    the input gives the centered system.  ``residual`` is the norm of the
    center functional after the transform (for minimax centers, the distance
    from ``o`` to the hull of the active cap centers).
    """

    status: Status
    point: np.ndarray
    transform: np.ndarray
    residual: float
    residual_history: list[float]
    iterations: int
    wall_time: float
    spec: str = ""
    message: str = ""
    experimental: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


# ---------------------------------------------------------------------------
# Problems: what is being centered


@dataclass
class Problem:
    """Poles of all caps, the center residual on transformed poles, and the lifted field."""

    poles: np.ndarray
    residual: Callable[[np.ndarray], np.ndarray]
    field: Callable[[np.ndarray], object]
    label: str
    experimental: bool = False
    plane_labels: tuple[str, int] | None = None
    n_vertex: int = 0

    @property
    def dim(self) -> int:
        return self.poles.shape[1] - 2

    def classify(self, k: int) -> str:
        if self.plane_labels is None:
            return f"Cap({k})"
        if k < self.n_vertex:
            return f"VertexPlane({k})"
        return f"FacePlane({k - self.n_vertex})"


def _caps_of(P: np.ndarray):
    x, t = P[:, :-1], P[:, -1]
    if np.any(t <= 0):
        raise DomainError("a transformed cap reached radius pi/2")
    return x / np.linalg.norm(x, axis=1)[:, None], np.arctan2(1.0, t)


def koebe_problem(system: KoebeCapSystem, spec: CenterSpec) -> Problem:
    spec.check_applicable(system.combinatorics)
    comb = system.combinatorics
    n = system.n

    def residual(P):
        c, r = _caps_of(P)
        w, W, kappa = coefficients(spec, r[:n], r[n:], comb)
        return (w @ c[:n] + W @ c[n:]) / kappa

    return Problem(np.vstack([system.vertex_poles, system.face_poles]), residual,
                   lambda p: lift_field(spec, system, p), spec.label, spec.experimental,
                   ("vertex", "face"), n)


def caps_problem(poles: np.ndarray, weights) -> Problem:
    poles = np.atleast_2d(np.asarray(poles, float))

    def residual(P):
        c, r = _caps_of(P)
        return weighted_cap_residual(c, r, weights)

    label = weights.label if isinstance(weights, WeightFamily) else "weighted_caps"
    return Problem(poles, residual, lambda p: weighted_cap_field(p, poles, weights), label)


# ---------------------------------------------------------------------------
# Local charts


def _apply(T: np.ndarray, P: np.ndarray) -> np.ndarray:
    Q = P @ T.T
    return Q / np.sqrt(hc.mdot(Q, Q))[:, None]


def _chart_map(x: np.ndarray) -> np.ndarray:
    """Pure boost taking the point with ball coordinates ``x`` to ``o``."""
    return hc.boost_to_origin(hc.ball_chart_inverse(x))


def _margin_ok(P: np.ndarray, margin: float) -> bool:
    return bool(np.all(P[:, -1] > np.sinh(margin)))


def _point_of(T: np.ndarray) -> np.ndarray:
    return hc.renormalize_point(hc.lorentz_inverse(T)[:, -1])


def _finish(problem, T, status, history, it, t0, msg="", extra=None) -> SolveReport:
    p = _point_of(T)
    B = hc.boost_to_origin(p)
    try:
        res = float(np.linalg.norm(problem.residual(_apply(B, problem.poles))))
    except (DomainError, DegeneracyError):
        res = np.inf
        status = Status.BOUNDARY_ESCAPE
    return SolveReport(status, p, B, res, history, it, time.perf_counter() - t0, problem.label, msg,
                       problem.experimental, extra or {})


# ---------------------------------------------------------------------------
# Newton and flow


def _newton(problem: Problem, T: np.ndarray, opts: SolveOptions, history: list, budget: int):
    """Damped Newton in recentred ball coordinates; returns ``(T, iterations, state)``."""
    dim = problem.dim + 1
    h = opts.fd_step
    eps_t = np.sinh(opts.boundary_margin)
    it = 0
    while it < budget:
        P = _apply(T, problem.poles)
        r0 = problem.residual(P)
        n0 = float(np.linalg.norm(r0))
        if n0 <= POLISH * opts.tol_residual:
            return T, it, "converged"
        J = np.empty((dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = h
            try:
                J[:, k] = (problem.residual(_apply(_chart_map(e), P)) -
                           problem.residual(_apply(_chart_map(-e), P))) / (2 * h)
            except (DomainError, DegeneracyError):
                return T, it, "converged" if n0 <= opts.tol_residual else "stalled"
        if len(history) > STALL_WINDOW and n0 > opts.tol_residual and \
                n0 > 0.5 * history[-1 - STALL_WINDOW]:
            return T, it, "stalled"
        floor = BARRIER * P[:, -1].min()
        dx = np.linalg.lstsq(J, -r0, rcond=None)[0]
        nrm = np.linalg.norm(dx)
        if nrm > opts.trust_radius:
            dx *= opts.trust_radius / nrm
        lam = 1.0
        it += 1
        while True:
            x = lam * dx
            if np.linalg.norm(x) < opts.tol_step:
                return T, it, "converged" if n0 <= opts.tol_residual else "stalled"
            M = _chart_map(x)
            Q = _apply(M, P)
            if _margin_ok(Q, opts.boundary_margin) and Q[:, -1].min() > max(eps_t, floor):
                try:
                    n1 = float(np.linalg.norm(problem.residual(Q)))
                except (DomainError, DegeneracyError):
                    n1 = np.inf
                if n1 < n0:
                    break
            lam *= 0.5
        T = M @ T
        history.append(n1)
    return T, it, "budget"


def _flow(problem: Problem, T: np.ndarray, opts: SolveOptions, history: list, budget: int):
    """Geodesic steps against the lifted field, step length adapted to the residual."""
    gamma = 0.25
    it = 0
    while it < budget:
        P = _apply(T, problem.poles)
        n0 = float(np.linalg.norm(problem.residual(P)))
        if n0 <= opts.tol_residual:
            return T, it, "converged"
        if it > STALL_WINDOW and n0 > 0.5 * history[-1 - STALL_WINDOW]:
            return T, it, "stalled"
        Tinv = hc.lorentz_inverse(T)
        try:
            hv = T @ problem.field(Tinv[:, -1]).total
        except (DomainError, DegeneracyError):
            return T, it, "stalled"
        u = -hv[:-1] / np.linalg.norm(hv[:-1])
        it += 1
        while True:
            x = np.tanh(gamma / 2) * u
            M = _chart_map(x)
            Q = _apply(M, P)
            if _margin_ok(Q, opts.boundary_margin):
                try:
                    n1 = float(np.linalg.norm(problem.residual(Q)))
                except (DomainError, DegeneracyError):
                    n1 = np.inf
                if n1 < n0:
                    break
            gamma *= 0.5
            if gamma < opts.tol_step:
                return T, it, "stalled"
        T = M @ T
        history.append(n1)
        gamma = min(2.0 * gamma, 1.0)
    return T, it, "budget"


def _run(problem: Problem, T0: np.ndarray, opts: SolveOptions, t0: float, extra=None) -> SolveReport:
    history = [float(np.linalg.norm(problem.residual(_apply(T0, problem.poles))))]
    T = T0
    used = 0
    methods = {Method.NEWTON: [_newton], Method.FLOW: [_flow],
               Method.AUTO: [_newton, _flow, _newton]}[opts.method]
    state = "budget"
    for step in methods:
        if used >= opts.max_iter:
            break
        T, k, state = step(problem, T, opts, history, opts.max_iter - used)
        used += k
        if state == "converged":
            break
    if state == "converged" or history[-1] <= opts.tol_residual:
        rep = _finish(problem, T, Status.CONVERGED, history, used, t0, "", extra)
        if rep.residual > opts.tol_residual:
            rep.status = Status.MAX_ITER
            rep.message = "final residual above tolerance"
        return rep
    return _finish(problem, T, Status.MAX_ITER, history, used, t0, f"stopped: {state}", extra)


def solve_problem(problem: Problem, opts: SolveOptions = SolveOptions(), start=None) -> SolveReport:
    """Drive the problem's residual to zero from ``start`` (default ``o``)."""
    t0 = time.perf_counter()
    p0 = hc.origin(problem.dim) if start is None else hc.renormalize_point(start)
    T0 = hc.boost_to_origin(p0)
    if not _margin_ok(_apply(T0, problem.poles), opts.boundary_margin):
        raise DomainError("start point is not in the domain")
    rep = _run(problem, T0, opts, t0)
    rep.extra.setdefault("start", "origin" if start is None else "given")
    return rep


def solve(system: KoebeCapSystem, spec, opts: SolveOptions = SolveOptions(), start=None) -> SolveReport:
    """Find the boost that moves the chosen center of a Koebe cap system to ``o``.

    ``cc`` and ``ic`` are delegated to :func:`solve_minimax`; weighted-cap
    specs act on the vertex caps.  When the first run from ``o`` fails, the
    solve restarts from the minimax point of the vertex planes.
    """
    spec = spec if isinstance(spec, CenterSpec) else CenterSpec.parse(spec)
    require_valid(system, opts.validate_tol)
    if spec.kind is CenterKind.CC:
        return solve_minimax(system, "vertex", opts)
    if spec.kind is CenterKind.IC:
        return solve_minimax(system, "face", opts)
    if spec.kind is CenterKind.WEIGHTED_CAPS:
        return solve_caps(system.vertex_centers, system.vertex_radii,
                          spec.weights or WeightFamily(), opts, start)
    problem = koebe_problem(system, spec)
    rep = solve_problem(problem, opts, start)
    left = opts.max_iter - rep.iterations
    if not rep.converged and start is None and left > 0:
        mm = solve_minimax(system, "vertex", opts)
        if not mm.extra["in_domain"]:
            return rep
        t0 = time.perf_counter()
        retry = _run(problem, mm.transform, replace(opts, max_iter=left), t0, {"start": "minimax"})
        retry.iterations += rep.iterations
        retry.residual_history = rep.residual_history + retry.residual_history
        if retry.converged or retry.residual < rep.residual:
            rep = retry
    return rep


def solve_caps(centers, radii, weights, opts: SolveOptions = SolveOptions(), start=None) -> SolveReport:
    """Find ``T`` with ``sum_i w_i(rho_T(C_i)) c_T(C_i) = o`` for caps on ``S^d``.

    The boundary-coincidence condition and disconnectedness are checked first;
    a failure yields ``ConditionViolated`` with the checker report in ``extra``.
    """
    t0 = time.perf_counter()
    centers = np.atleast_2d(np.asarray(centers, float))
    radii = np.asarray(radii, float)
    poles = hc.caps_to_poles(centers, radii)
    dim = centers.shape[1] - 1
    weights = weights if not isinstance(weights, str) else WeightFamily.parse(weights)
    cond = check_condition(centers, radii, weights, seed=opts.seed)
    disc = check_disconnected(poles)
    if not cond.passed or not disc:
        msg = cond.message() if not cond.passed else "union of cap interiors is connected"
        o = hc.origin(dim)
        return SolveReport(Status.CONDITION_VIOLATED, o, np.eye(dim + 2), np.inf, [], 0,
                           time.perf_counter() - t0, "weighted_caps", msg, False,
                           {"condition": cond, "disconnected": disc})
    problem = caps_problem(poles, weights)
    rep = solve_problem(problem, opts, start)
    rep.extra.update({"condition": cond, "disconnected": disc})
    return rep


# ---------------------------------------------------------------------------
# Minimax centers


MAX_ENUMERATION = 50000


def _kkt_point(S: np.ndarray):
    """Equal-distance KKT point of the active poles ``S`` as ``(p, sinh d)``, or ``None``.

    At a local maximum of ``min_k d_k`` with active set ``K`` the point is
    ``p = -tau * sum_k y_k s_k`` with ``G y = 1`` (Minkowski Gram matrix),
    multipliers ``-y >= 0`` and ``tau = 1 / sqrt(-sum y)``.
    """
    out = _kkt_batch(S[None])
    if not out[2][0]:
        return None
    return out[0][0], float(out[1][0])


def _kkt_batch(S: np.ndarray):
    """Vectorized :func:`_kkt_point` over a stack of active sets ``(C, k, d+2)``."""
    G = np.einsum("cia,cja->cij", S[..., :-1], S[..., :-1]) - S[..., -1][:, :, None] * S[..., -1][:, None, :]
    sv = np.linalg.svd(G, compute_uv=False)
    ok = sv[:, -1] > 1e-12 * sv[:, 0]
    y = np.zeros(S.shape[:2])
    if ok.any():
        y[ok] = np.linalg.solve(G[ok], np.ones((int(ok.sum()), S.shape[1], 1)))[..., 0]
    q = y.sum(axis=1)
    scale = np.abs(y).max(axis=1)
    ok &= (q < 0) & np.all(y <= 1e-12 * scale[:, None], axis=1)
    tau = np.where(ok, 1.0 / np.sqrt(np.where(ok, -q, 1.0)), 0.0)
    P = -tau[:, None] * np.einsum("ck,cka->ca", y, S)
    ok &= P[:, -1] > 0
    return P, tau, ok


def _sinh_dist(P: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """``sinh`` of the signed distances from each row of ``P`` to each plane."""
    return -(P[:, :-1] @ poles[:, :-1].T - np.outer(P[:, -1], poles[:, -1]))


def minimax_by_enumeration(poles: np.ndarray, candidates=None, max_size: int | None = None,
                           domain_poles: np.ndarray | None = None, margin: float = 0.0):
    """Best KKT point over all active subsets of ``candidates``.

    Returns ``(p, sinh d, active)`` maximizing the common distance among
    points that are feasible (no plane closer than the active ones) and lie
    at distance greater than ``margin`` from every plane in ``domain_poles``;
    ``None`` if no subset qualifies.
    """
    poles = np.atleast_2d(np.asarray(poles, float))
    idx = list(range(len(poles))) if candidates is None else list(candidates)
    max_size = min(max_size or poles.shape[1], len(idx))
    best = None
    for k in range(2, max_size + 1):
        combos = np.array(list(itertools.combinations(idx, k)), dtype=int)
        if len(combos) == 0:
            continue
        P, tau, ok = _kkt_batch(poles[combos])
        if not ok.any():
            continue
        P, tau, combos = P[ok], tau[ok], combos[ok]
        P = P / np.sqrt(-hc.mdot(P, P))[:, None]
        feas = np.all(_sinh_dist(P, poles) >= tau[:, None] * (1 - 1e-10), axis=1)
        if domain_poles is not None and len(domain_poles):
            feas &= np.all(_sinh_dist(P, domain_poles) > np.sinh(margin), axis=1)
        if not feas.any():
            continue
        c = int(np.argmax(np.where(feas, tau, -np.inf)))
        if best is None or tau[c] > best[1]:
            best = (P[c], float(tau[c]), tuple(int(v) for v in combos[c]))
    return best


def _n_subsets(n: int, k: int) -> int:
    from math import comb
    return sum(comb(n, j) for j in range(2, k + 1))


def _min_sinh(x, poles, domain_poles, margin):
    try:
        p = hc.ball_chart_inverse(x)
    except DomainError:
        return -np.inf
    if domain_poles is not None and len(domain_poles) and np.min(_sinh_dist(p[None], domain_poles)) <= np.sinh(margin):
        return -np.inf
    return float(np.min(_sinh_dist(p[None], poles)))


def maximin_point(poles: np.ndarray, domain_poles: np.ndarray | None = None, margin: float = 0.0,
                  method: str = "auto"):
    """Point of the domain maximizing the smallest distance to ``poles``.

    Returns ``(p, sinh of that distance, active set)``.  The distance to a
    plane is convex along geodesics, so several local maxima may exist; all of
    them are KKT points, which are enumerated exactly when the number of
    active-set candidates is moderate.  Larger inputs use Nelder-Mead in ball
    coordinates with an exact KKT solve on the near-active planes
    (``method="search"`` forces this route).
    """
    poles = np.atleast_2d(np.asarray(poles, float))
    dim = poles.shape[1] - 1
    if method == "enumerate" or (method == "auto" and _n_subsets(len(poles), dim + 1) <= MAX_ENUMERATION):
        best = minimax_by_enumeration(poles, None, dim + 1, domain_poles, margin)
        if best is None and domain_poles is not None:
            best = minimax_by_enumeration(poles, None, dim + 1)
        if best is None:
            raise DegeneracyError("no KKT point of the minimax problem lies in the domain")
        return best
    f = lambda x: -_min_sinh(x, poles, domain_poles, margin)
    x = np.zeros(dim)
    for scale in (0.2, 0.01):
        res = minimize(f, x, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000 * dim,
                                "initial_simplex": np.vstack([x, x + scale * np.eye(dim)])})
        x = res.x
    p = hc.ball_chart_inverse(x)
    vals = _sinh_dist(p[None], poles)[0]
    order = np.argsort(vals)
    for delta in (1e-9, 1e-7, 1e-5, 1e-3, 1e-2, 1e-1):
        near = [int(i) for i in order[:12] if vals[i] <= vals[order[0]] * (1 + delta) + delta]
        best = minimax_by_enumeration(poles, near, dim + 1, domain_poles, margin)
        if best is not None:
            return best
    raise DegeneracyError("no KKT point found for the minimax problem")


def solve_minimax(system: KoebeCapSystem, which: str = "vertex", opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Center of the smallest enclosing ball (``which="vertex"``) or of a largest inscribed ball (``"face"``).

    Maximizes the smallest distance from ``p`` to the vertex (resp. face)
    planes; at the optimum ``o`` lies in the hull of the centers of the
    largest caps of the transformed system, which is certified afterwards.
    """
    t0 = time.perf_counter()
    which = {"vertexplanes": "vertex", "faceplanes": "face", "cc": "vertex", "ic": "face"}.get(
        which.lower().replace("_", ""), which.lower())
    if which not in ("vertex", "face"):
        raise DomainError("which must be 'vertex' or 'face'")
    poles, other = ((system.vertex_poles, system.face_poles) if which == "vertex"
                    else (system.face_poles, system.vertex_poles))
    p, tau, active = maximin_point(poles, other, opts.boundary_margin)
    B = hc.boost_to_origin(p)
    centers, radii = hc.poles_to_caps(_apply(B, poles))
    if which == "vertex":
        cert = cc_certificate_caps(centers, radii)
    else:
        cert = ic_certificate_caps(centers, radii)
    all_poles = _apply(B, np.vstack([system.vertex_poles, system.face_poles]))
    status = Status.CONVERGED if cert.passed else Status.MAX_ITER
    extra = {"certificate": cert, "active": list(active), "min_distance": float(np.arcsinh(tau)),
             "in_domain": bool(np.all(all_poles[:, -1] > 0))}
    if which == "vertex":
        extra["enclosing_ball_center"] = cert.center
    msg = "" if cert.passed else "hull certificate failed"
    if not extra["in_domain"]:
        msg = (msg + "; " if msg else "") + "centered system has a cap of radius >= pi/2"
    return SolveReport(status, p, B, cert.hull_distance, [cert.hull_distance], 1,
                       time.perf_counter() - t0, "cc" if which == "vertex" else "ic",
                       msg, False, extra)


# ---------------------------------------------------------------------------
# Integral curves

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class IntegralCurve:
    """Samples ``(arc length, point)`` along a flow line and where it ended."""

    samples: list[tuple[float, np.ndarray]]
    endpoint: str
    direction: int
    residuals: list[float] = field(default_factory=list)
    potentials: list[float] = field(default_factory=list)
    steps: int = 0

    @property
    def end(self) -> np.ndarray:
        return self.samples[-1][1]

    @property
    def length(self) -> float:
        return self.samples[-1][0]


ATOL = 1e-11


@dataclass(frozen=True)
class TraceOptions:
    direction: int = -1
    tol_zero: float = 1e-9
    local_tol: float = 1e-8
    boundary_eps: float = 1e-6
    max_steps: int = 5000
    max_radius: float = 40.0


def _chart_field(problem: Problem, Tinv: np.ndarray, y: np.ndarray, sign: float) -> np.ndarray:
    """Scaled field in ball coordinates of the chart whose centre is ``Tinv o``."""
    q = hc.ball_chart_inverse(y)
    p = hc.renormalize_point(Tinv @ q)
    h = problem.field(p).total
    hn = np.sqrt(max(hc.mdot(h, h), 0.0))
    v = hc.lorentz_inverse(Tinv) @ (h / np.sqrt(1.0 + hn * hn))
    return sign * hc.ball_chart_pushforward(q, v)


def trace_curve(problem: Problem, p0, opts: TraceOptions = TraceOptions(), weights=None) -> IntegralCurve:
    """Integrate ``p' = direction * h(p) / sqrt(1 + |h|^2)`` from ``p0``.

    Each step works in a ball chart centred at the current point, with
    Dormand-Prince 5(4) error control and steps capped at half the distance to
    the nearest plane.  Ends with ``Zero`` when the center residual drops
    below ``tol_zero``, with the plane label when a plane is closer than
    ``boundary_eps``, and ``Undetermined`` otherwise.
    """
    p = hc.renormalize_point(np.asarray(p0, float))
    poles = problem.poles
    if np.any(hc.mdot(poles, p) >= 0):
        raise DomainError("start point is not in the domain")
    sign = float(np.sign(opts.direction) or 1)
    s = 0.0
    samples = [(s, p.copy())]
    resid = [_residual_at(problem, p)]
    pots = [potential(p, poles, weights)] if weights is not None else []
    h = 0.05
    o = hc.origin(problem.dim)
    endpoint = "Undetermined"
    steps = 0
    while steps < opts.max_steps:
        if resid[-1] < opts.tol_zero:
            endpoint = "Zero"
            break
        dist = np.arcsinh(-hc.mdot(poles, p))
        k = int(np.argmin(dist))
        if dist[k] < opts.boundary_eps:
            endpoint = problem.classify(k)
            break
        if hc.distance(o, p) > opts.max_radius:
            break
        Tinv = hc.boost_from_origin(p)
        cap = np.tanh(0.25 * dist[k])
        try:
            K = [_chart_field(problem, Tinv, np.zeros(problem.dim + 1), sign)]
        except DomainError:
            break
        hmax = cap / max(np.linalg.norm(K[0]), 1e-300)
        h = min(h, hmax)
        while True:
            try:
                K = K[:1]
                for i in range(1, 7):
                    y = h * sum(a * k_ for a, k_ in zip(_DP_A[i], K))
                    K.append(_chart_field(problem, Tinv, y, sign))
                y5 = h * sum(b * k_ for b, k_ in zip(_DP_B5, K))
                y4 = h * sum(b * k_ for b, k_ in zip(_DP_B4, K))
                ny = np.linalg.norm(y5)
                err = np.linalg.norm(y5 - y4) / (opts.local_tol * ny + ATOL)
            except DomainError:
                ny, err = np.inf, np.inf
            if err <= 1.0 and ny <= cap:
                break
            if ny > cap:
                h *= 0.5 * cap / ny if np.isfinite(ny) else 0.25
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14:
                break
        if h < 1e-14:
            break
        q = hc.renormalize_point(Tinv @ hc.ball_chart_inverse(y5))
        s += hc.distance(p, q)
        p = q
        steps += 1
        samples.append((s, p.copy()))
        resid.append(_residual_at(problem, p))
        if weights is not None:
            pots.append(potential(p, poles, weights))
        grow = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        h = max(h * grow, 1e-12)
    return IntegralCurve(samples, endpoint, int(sign), resid, pots, steps)


def _residual_at(problem: Problem, p: np.ndarray) -> float:
    try:
        return float(np.linalg.norm(problem.residual(_apply(hc.boost_to_origin(p), problem.poles))))
    except DomainError:
        return np.inf


def random_start(problem: Problem, rng: np.random.Generator, center=None, radius: float = 1.0,
                 margin: float = 1e-2) -> np.ndarray:
    """Random point of ``D`` within hyperbolic distance ``radius`` of ``center``."""
    dim = problem.dim + 1
    c = hc.origin(problem.dim) if center is None else center
    Tinv = hc.boost_from_origin(c)
    for _ in range(10000):
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        x = np.tanh(rng.uniform(0, radius) / 2) * u
        p = hc.renormalize_point(Tinv @ hc.ball_chart_inverse(x))
        if np.all(np.arcsinh(-hc.mdot(problem.poles, p)) > margin):
            return p
    raise DegeneracyError("could not sample a start point in the domain")


@dataclass
class MultistartResult:
    """Converged points of a multistart run grouped into clusters."""

    reports: list
    clusters: list[np.ndarray]
    members: list[list[int]]
    spread: float

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.reports)

    @property
    def unique(self) -> bool:
        return len(self.clusters) == 1 and self.n_converged == len(self.reports)


def multistart(system: KoebeCapSystem, spec, starts: int = 20, seed: int = 0, radius: float = 1.5,
               cluster_tol: float = 1e-6, opts: SolveOptions = SolveOptions()) -> MultistartResult:
    """Solve from ``starts`` random points of ``D`` around ``o`` and cluster the answers.

    ``spread`` is the largest distance between two converged points.
    """
    spec = CenterSpec.parse(spec) if isinstance(spec, str) else spec
    problem = koebe_problem(system, spec)
    rng = np.random.default_rng(seed)
    reports = [solve_problem(problem, opts, start=random_start(problem, rng, None, radius))
               for _ in range(starts)]
    clusters, members = [], []
    for k, rep in enumerate(reports):
        if not rep.converged:
            continue
        for c, mem in zip(clusters, members):
            if hc.distance(c, rep.point) < cluster_tol:
                mem.append(k)
                break
        else:
            clusters.append(rep.point)
            members.append([k])
    pts = [r.point for r in reports if r.converged]
    spread = max((hc.distance(a, b) for a, b in itertools.combinations(pts, 2)), default=0.0)
    return MultistartResult(reports, clusters, members, float(spread))


# ---------------------------------------------------------------------------
# Batch runs


@dataclass(frozen=True)
class Job:
    """One batch entry: a system source, a spec and a perturbation."""

    source: str
    spec: str
    rapidity: float = 0.0
    seed: int = 0
    drift: tuple[int, float] | None = None
    options: SolveOptions = SolveOptions()


BATCH_COLUMNS = ("job", "source", "spec", "rapidity", "seed", "status", "residual", "iterations",
                 "wall_time", "message")


def _load_source(source: str):
    from .koebe import SOLIDS, generate_canonical
    if source in SOLIDS:
        return generate_canonical(source)
    from .documents import read_system
    return read_system(source)


def run_job(index: int, job: Job) -> dict:
    from .koebe import drift_construction, random_perturbation
    row = {"job": index, "source": job.source, "spec": job.spec, "rapidity": job.rapidity,
           "seed": job.seed, "status": "", "residual": np.nan, "iterations": 0, "wall_time": 0.0,
           "message": ""}
    try:
        system = _load_source(job.source)
        if job.rapidity > 0:
            system, _ = random_perturbation(system, job.seed, job.rapidity)
        if job.drift is not None:
            system, _ = drift_construction(system, *job.drift)
        rep = solve(system, job.spec, replace(job.options, seed=job.seed))
        row.update(status=rep.status.value, residual=rep.residual, iterations=rep.iterations,
                   wall_time=rep.wall_time, message=rep.message)
    except SpecMismatchError as exc:
        row.update(status=Status.NOT_SUPPORTED.value, message=str(exc))
    except (KoebeError, ValueError, ArithmeticError, OSError) as exc:
        row.update(status="Error", message=f"{type(exc).__name__}: {exc}")
    return row


def batch(jobs, workers: int = 1) -> list[dict]:
    """Run jobs independently; errors are captured per row and never stop the batch."""
    jobs = list(jobs)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(run_job, range(len(jobs)), jobs))
    return [run_job(i, j) for i, j in enumerate(jobs)]
