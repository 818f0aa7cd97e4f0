"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 bad flags or unreadable input,
3 no convergence, 4 center not applicable to the combinatorics, 5 weighted-cap
hypotheses fail.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import hypcore as hc
from . import koebe
from .centers import CenterKind, CenterSpec
from .documents import (CapSystemDocument, read_caps_document, read_system, write_caps_document,
                        write_csv, write_obj, write_system, write_transform)
from .errors import DocumentError, KoebeError, SpecMismatchError
from .fields import WeightFamily
from .solver import (BATCH_COLUMNS, Job, Method, SolveOptions, Status, TraceOptions, batch,
                     koebe_problem, random_start, solve, solve_caps, trace_curve)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_NO_CONVERGENCE, EXIT_MISMATCH, EXIT_HYPOTHESIS = range(6)


class UsageError(Exception):
    pass


def _out(msg: str) -> None:
    print(msg, flush=True)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _load_system(path: str, tol: float):
    system = read_system(path)
    rep = koebe.validate(system, tol)
    if not rep.passed:
        raise DocumentError(f"{path} fails validation: {', '.join(rep.failures)}")
    return system


def _drift_arg(text: str) -> tuple[int, float]:
    try:
        i, step = text.split(":")
        return int(i), float(step)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected VERTEX:STEP, got {text!r}") from None


def _spec_arg(text: str) -> CenterSpec:
    try:
        return CenterSpec.parse(text)
    except (KoebeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _weights_arg(text: str) -> WeightFamily:
    try:
        return WeightFamily.parse(text)
    except (KoebeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write_or_print(path, system, meta) -> None:
    if path:
        write_system(path, system, meta)
    else:
        sys.stdout.write(json.dumps(CapSystemDocument.from_system(system, meta).to_json(), indent=1) + "\n")


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    if args.name not in koebe.SOLIDS:
        raise UsageError(f"unknown solid {args.name!r}; expected one of {', '.join(koebe.SOLIDS)}")
    system = koebe.generate_canonical(args.name)
    meta = {"name": args.name, "provenance": "canonical"}
    if args.rapidity is not None:
        if args.rapidity < 0:
            raise UsageError("--rapidity must be non-negative")
        system, _ = koebe.random_perturbation(system, args.seed, args.rapidity)
        meta.update(seed=args.seed, rapidity=args.rapidity, provenance="random Mobius perturbation")
    if args.drift is not None:
        i, step = args.drift
        system, diag = koebe.drift_construction(system, i, step)
        meta.update(drift_vertex=i, drift_step=step, drift_rapidity=diag.rapidity,
                    provenance="drift construction")
        _err(f"drift vertex={i} step={step:g} rapidity={diag.rapidity:.6f} "
             f"critical={diag.critical_rapidity:.6f} |cm0|={diag.cm0_norm:.6f}")
    koebe.require_valid(system, args.tol)
    _write_or_print(args.out, system, meta)
    if args.out:
        _err(f"wrote {args.out}: {system.n} vertex caps, {system.m} face caps")
    return EXIT_OK


def cmd_validate(args) -> int:
    system = read_system(args.input)
    rep = koebe.validate(system, args.tol)
    _out(f"{'check':<26}{'residual':>14}  result")
    for name, val in rep.checks.items():
        _out(f"{name:<26}{val:>14.3e}  {'fail' if name in rep.failures else 'ok'}")
    _out("valid" if rep.passed else "invalid")
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_reconstruct(args) -> int:
    system = _load_system(args.input, args.tol)
    poly = koebe.reconstruct(system, args.tol)
    if args.out_mesh:
        write_obj(args.out_mesh, poly, system.name or "polyhedron")
    lengths = poly.edge_lengths
    _out(f"vertices={len(poly.vertices)} faces={len(poly.faces)} edges={len(lengths)} "
         f"edge_length=[{lengths.min():.9g}, {lengths.max():.9g}]")
    return EXIT_OK


def _options(args) -> SolveOptions:
    return SolveOptions(tol_residual=args.tol, max_iter=args.max_iter, method=Method(args.solver),
                        seed=args.seed, validate_tol=args.validate_tol)


def cmd_center(args) -> int:
    system = _load_system(args.input, args.validate_tol)
    spec = args.spec
    if spec.kind is CenterKind.WEIGHTED_CAPS:
        raise UsageError("use caps-center for weighted caps")
    try:
        spec.check_applicable(system.combinatorics)
    except SpecMismatchError as exc:
        _err(f"spec mismatch: {exc}")
        return EXIT_MISMATCH
    rep = solve(system, spec, _options(args))
    meta = {"name": system.name, "spec": spec.label, "status": rep.status.value,
            "residual": float(rep.residual), "iterations": rep.iterations, "seed": args.seed}
    if spec.kind is CenterKind.EULER:
        meta["lambda"] = spec.lam
    if spec.experimental:
        meta["experimental"] = True
    if rep.converged:
        out = system.transformed(rep.transform)
        koebe.require_valid(out, args.validate_tol)
        if args.out_system:
            write_system(args.out_system, out, meta)
        if args.out_transform:
            write_transform(args.out_transform, rep.transform, meta)
        if args.out_mesh:
            write_obj(args.out_mesh, koebe.reconstruct(out, args.validate_tol), system.name or "polyhedron")
    tag = f" (<{args.tol:g})" if rep.converged else ""
    _out(f"{rep.status.value} residual={rep.residual:.3e}{tag} iterations={rep.iterations} "
         f"spec={spec.label}" + (" experimental" if spec.experimental else ""))
    if rep.message:
        _err(rep.message)
    return EXIT_OK if rep.converged else EXIT_NO_CONVERGENCE


def cmd_caps_center(args) -> int:
    doc = read_caps_document(args.input)
    if doc.dimension < 2:
        raise UsageError("weighted-cap centering needs d >= 2")
    rep = solve_caps(doc.vertex_centers, doc.vertex_radii, args.weights, _options(args))
    if rep.status is Status.CONDITION_VIOLATED:
        _out(f"ConditionViolated: {rep.message}")
        return EXIT_HYPOTHESIS
    meta = dict(doc.metadata, weights=args.weights.label, status=rep.status.value,
                residual=float(rep.residual), iterations=rep.iterations)
    if rep.converged:
        S = hc.apply_poles(rep.transform, hc.caps_to_poles(doc.vertex_centers, doc.vertex_radii))
        C, r = hc.poles_to_caps(S)
        if args.out:
            write_caps_document(args.out, CapSystemDocument.from_caps(C, r, meta))
        if args.out_transform:
            write_transform(args.out_transform, rep.transform, meta)
    tag = f" (<{args.tol:g})" if rep.converged else ""
    _out(f"{rep.status.value} residual={rep.residual:.3e}{tag} iterations={rep.iterations} "
         f"weights={args.weights.label} n={len(doc.vertex_radii)} d={doc.dimension}")
    return EXIT_OK if rep.converged else EXIT_NO_CONVERGENCE


def cmd_trace(args) -> int:
    system = _load_system(args.input, args.validate_tol)
    spec = args.spec
    if spec.kind in (CenterKind.CC, CenterKind.IC, CenterKind.WEIGHTED_CAPS):
        raise UsageError(f"{spec.label} has no smooth field to trace")
    try:
        spec.check_applicable(system.combinatorics)
    except SpecMismatchError as exc:
        _err(f"spec mismatch: {exc}")
        return EXIT_MISMATCH
    problem = koebe_problem(system, spec)
    ref = solve(system, spec, SolveOptions(seed=args.seed))
    centre = ref.point if ref.converged else None
    rng = np.random.default_rng(args.seed)
    opts = TraceOptions(direction=-1 if args.direction == "backward" else 1, max_steps=args.max_steps)
    rows, ends, counts = [], [], {}
    for c in range(args.starts):
        curve = trace_curve(problem, random_start(problem, rng, centre, args.radius), opts)
        for (s, p), r in zip(curve.samples, curve.residuals):
            rows.append([c, s, *hc.ball_chart(p), r, curve.endpoint])
        counts[curve.endpoint] = counts.get(curve.endpoint, 0) + 1
        if curve.endpoint == "Zero":
            ends.append(curve.end)
    if args.out_csv:
        ball = [f"b{k}" for k in range(problem.dim + 1)]
        write_csv(args.out_csv, ["curve", "s", *ball, "residual", "endpoint"], rows)
    spread = max((hc.distance(a, b) for a in ends for b in ends), default=0.0)
    gap = max((hc.distance(a, ref.point) for a in ends), default=0.0) if ref.converged else float("nan")
    summary = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    _out(f"curves={args.starts} {summary} zero_spread={spread:.3e} distance_to_solve={gap:.3e}")
    return EXIT_OK


def _manifest_jobs(path: str) -> list[Job]:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DocumentError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != "koebe-batch/1":
        raise DocumentError("manifest must be an object with format 'koebe-batch/1'")
    defaults = obj.get("options", {})
    entries = list(obj.get("jobs", []))
    grid = obj.get("grid")
    if grid:
        for src in grid["sources"]:
            for spec in grid["specs"]:
                for seed in grid.get("seeds", [0]):
                    entries.append({"source": src, "spec": spec, "seed": seed,
                                    "rapidity": grid.get("rapidity", 0.0)})
    jobs = []
    for e in entries:
        try:
            opts = SolveOptions(**{**defaults, **e.get("options", {})})
            drift = _drift_arg(e["drift"]) if "drift" in e else None
            jobs.append(Job(str(e["source"]), str(e["spec"]), float(e.get("rapidity", 0.0)),
                            int(e.get("seed", 0)), drift, opts))
        except (KeyError, TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise DocumentError(f"bad manifest entry {e!r}: {exc}") from exc
    return jobs


def cmd_batch(args) -> int:
    rows = batch(_manifest_jobs(args.manifest), args.workers)
    if args.out_csv:
        write_csv(args.out_csv, BATCH_COLUMNS, rows)
    for r in rows:
        _out(f"{r['job']:>4} {r['source']:<14} {r['spec']:<12} {r['status']:<16} "
             f"residual={r['residual']:.3e} iterations={r['iterations']}")
    counts = {}
    for r in rows:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    _out("total " + " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="koebe-center", description="Mobius centering of Koebe polyhedra.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a canonical, perturbed or drifted cap system")
    p.add_argument("name")
    p.add_argument("--random-seed", "--seed", dest="seed", type=int, default=0)
    p.add_argument("--rapidity", type=float)
    p.add_argument("--drift", type=_drift_arg, metavar="VERTEX:STEP")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="print the validation residual table")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reconstruct", help="rebuild the polyhedron and export an OBJ mesh")
    p.add_argument("input")
    p.add_argument("--out-mesh")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_reconstruct)

    def solver_flags(p):
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--solver", choices=[m.value for m in Method], default="auto")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--validate-tol", type=float, default=1e-8)

    p = sub.add_parser("center", help="move a center of the polyhedron to the origin")
    p.add_argument("input")
    p.add_argument("--spec", type=_spec_arg, required=True)
    solver_flags(p)
    p.add_argument("--out-system")
    p.add_argument("--out-transform")
    p.add_argument("--out-mesh")
    p.set_defaults(func=cmd_center)

    p = sub.add_parser("caps-center", help="weighted centering of caps on S^d")
    p.add_argument("input")
    p.add_argument("--weights", type=_weights_arg, default=WeightFamily())
    solver_flags(p)
    p.add_argument("-o", "--out")
    p.add_argument("--out-transform")
    p.set_defaults(func=cmd_caps_center)

    p = sub.add_parser("trace", help="integrate flow lines of a center field")
    p.add_argument("input")
    p.add_argument("--spec", type=_spec_arg, required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--radius", type=float, default=0.25,
                   help="starts are drawn within this distance of the solved point")
    p.add_argument("--direction", choices=["backward", "forward"], default="backward")
    p.add_argument("--max-steps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--validate-tol", type=float, default=1e-8)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("batch", help="run a manifest of jobs")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_batch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    except SpecMismatchError as exc:
        _err(f"spec mismatch: {exc}")
        return EXIT_MISMATCH
    except (DocumentError, KoebeError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
