"""Text formats: cap-system and transform documents, OBJ meshes, CSV tables.

Documents are UTF-8 JSON with a ``format`` tag.  Floats are written with
Python's shortest round-trip representation, so ``write`` followed by
``read`` reproduces every finite double exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hypcore as hc
from .errors import DocumentError
from .koebe import EuclideanPolyhedron, KoebeCapSystem, derive_combinatorics

CAPS_FORMAT = "koebe-caps/1"
TRANSFORM_FORMAT = "koebe-transform/1"
LORENTZ_TOL = 1e-8

_CAPS_KEYS = {"format", "dimension", "vertex_caps", "face_caps", "faces", "metadata"}
_TRANSFORM_KEYS = {"format", "dimension", "matrix", "metadata"}


@dataclass
class CapSystemDocument:
    """Caps on ``S^d`` plus optional face caps and face cycles.

    A caps-only document has no face caps and no faces; it feeds the
    weighted-cap centering and may live in any dimension ``d >= 1``.
    """

    dimension: int
    vertex_centers: np.ndarray
    vertex_radii: np.ndarray
    face_centers: np.ndarray
    face_radii: np.ndarray
    faces: list[list[int]]
    metadata: dict = field(default_factory=dict)

    @property
    def caps_only(self) -> bool:
        return len(self.faces) == 0 and len(self.face_radii) == 0

    @classmethod
    def from_system(cls, system: KoebeCapSystem, metadata: dict | None = None) -> "CapSystemDocument":
        meta = {"name": system.name} if system.name else {}
        meta.update(metadata or {})
        return cls(2, np.array(system.vertex_centers), np.array(system.vertex_radii),
                   np.array(system.face_centers), np.array(system.face_radii),
                   [list(map(int, f)) for f in system.faces], meta)

    @classmethod
    def from_caps(cls, centers, radii, metadata: dict | None = None) -> "CapSystemDocument":
        centers = np.array(centers, dtype=float, ndmin=2)
        return cls(centers.shape[1] - 1, centers, np.array(radii, dtype=float, ndmin=1),
                   np.zeros((0, centers.shape[1])), np.zeros(0), [], dict(metadata or {}))

    def to_system(self) -> KoebeCapSystem:
        if self.dimension != 2:
            raise DocumentError(f"Koebe systems live on S^2, document has dimension {self.dimension}")
        if self.caps_only:
            raise DocumentError("document has no face caps or faces")
        comb = derive_combinatorics([tuple(f) for f in self.faces], len(self.vertex_radii))
        return KoebeCapSystem(self.vertex_centers, self.vertex_radii, self.face_centers,
                              self.face_radii, comb, str(self.metadata.get("name", "")))

    def to_json(self) -> dict:
        def caps(C, r):
            return [{"center": [float(x) for x in c], "radius": float(a)} for c, a in zip(C, r)]

        return {
            "format": CAPS_FORMAT,
            "dimension": int(self.dimension),
            "vertex_caps": caps(self.vertex_centers, self.vertex_radii),
            "face_caps": caps(self.face_centers, self.face_radii),
            "faces": [[int(i) for i in f] for f in self.faces],
            "metadata": self.metadata,
        }


@dataclass
class TransformDocument:
    """A Lorentz matrix of size ``(d+2, d+2)``, time coordinate last."""

    matrix: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0] - 2

    def to_json(self) -> dict:
        return {
            "format": TRANSFORM_FORMAT,
            "dimension": self.dimension,
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "metadata": self.metadata,
        }


# ---------------------------------------------------------------------------
# Parsing helpers


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise DocumentError(f"{what}: expected a number, got {type(x).__name__}")
    if not math.isfinite(x):
        raise DocumentError(f"{what}: non-finite value")
    return float(x)


def _integer(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise DocumentError(f"{what}: expected an integer")
    return x


def _check_keys(obj, allowed: set, required: set, what: str) -> None:
    if not isinstance(obj, dict):
        raise DocumentError(f"{what}: expected an object")
    extra = set(obj) - allowed
    missing = required - set(obj)
    if extra:
        raise DocumentError(f"{what}: unknown keys {sorted(extra)}")
    if missing:
        raise DocumentError(f"{what}: missing keys {sorted(missing)}")


def _caps(items, d: int, what: str):
    if not isinstance(items, list):
        raise DocumentError(f"{what}: expected a list")
    C = np.zeros((len(items), d + 1))
    r = np.zeros(len(items))
    for k, cap in enumerate(items):
        _check_keys(cap, {"center", "radius"}, {"center", "radius"}, f"{what}[{k}]")
        c = cap["center"]
        if not isinstance(c, list) or len(c) != d + 1:
            raise DocumentError(f"{what}[{k}].center: expected {d + 1} numbers")
        C[k] = [_number(x, f"{what}[{k}].center") for x in c]
        r[k] = _number(cap["radius"], f"{what}[{k}].radius")
    return C, r


def _load_json(text: str):
    try:
        return json.loads(text, parse_constant=lambda s: _raise(f"non-finite literal {s}"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from exc


def _raise(msg):
    raise DocumentError(msg)


def _dump_json(obj) -> str:
    try:
        return json.dumps(obj, indent=1, allow_nan=False, ensure_ascii=False) + "\n"
    except ValueError as exc:
        raise DocumentError(f"cannot serialise: {exc}") from exc


def parse_caps_document(text: str) -> CapSystemDocument:
    obj = _load_json(text)
    _check_keys(obj, _CAPS_KEYS, {"format", "vertex_caps"}, "document")
    if obj["format"] != CAPS_FORMAT:
        raise DocumentError(f"format must be {CAPS_FORMAT!r}, got {obj['format']!r}")
    d = _integer(obj.get("dimension", 2), "dimension")
    if d < 1:
        raise DocumentError("dimension must be >= 1")
    VC, VR = _caps(obj["vertex_caps"], d, "vertex_caps")
    FC, FR = _caps(obj.get("face_caps", []), d, "face_caps")
    faces = obj.get("faces", [])
    if not isinstance(faces, list):
        raise DocumentError("faces: expected a list")
    for k, f in enumerate(faces):
        if not isinstance(f, list) or len(f) < 3:
            raise DocumentError(f"faces[{k}]: expected a cycle of at least 3 indices")
        for i in f:
            if not 0 <= _integer(i, f"faces[{k}]") < len(VR):
                raise DocumentError(f"faces[{k}]: vertex index {i} out of range")
    if len(faces) != len(FR):
        raise DocumentError(f"{len(faces)} faces but {len(FR)} face caps")
    meta = obj.get("metadata", {})
    if not isinstance(meta, dict):
        raise DocumentError("metadata: expected an object")
    return CapSystemDocument(d, VC, VR, FC, FR, [list(f) for f in faces], meta)


def parse_transform_document(text: str, tol: float = LORENTZ_TOL) -> TransformDocument:
    obj = _load_json(text)
    _check_keys(obj, _TRANSFORM_KEYS, {"format", "matrix"}, "document")
    if obj["format"] != TRANSFORM_FORMAT:
        raise DocumentError(f"format must be {TRANSFORM_FORMAT!r}, got {obj['format']!r}")
    rows = obj["matrix"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) and len(r) == len(rows) for r in rows):
        raise DocumentError("matrix: expected a square list of rows")
    M = np.array([[_number(x, "matrix") for x in r] for r in rows])
    d = _integer(obj.get("dimension", M.shape[0] - 2), "dimension")
    if M.shape != (d + 2, d + 2):
        raise DocumentError(f"matrix must be {d + 2}x{d + 2}")
    if not hc.is_lorentz(M, tol):
        raise DocumentError("matrix does not preserve the Minkowski form")
    meta = obj.get("metadata", {})
    if not isinstance(meta, dict):
        raise DocumentError("metadata: expected an object")
    return TransformDocument(M, meta)


# ---------------------------------------------------------------------------
# Files


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc


def write_caps_document(path, doc: CapSystemDocument) -> None:
    Path(path).write_text(_dump_json(doc.to_json()), encoding="utf-8")


def read_caps_document(path) -> CapSystemDocument:
    return parse_caps_document(_read_text(path))


def write_system(path, system: KoebeCapSystem, metadata: dict | None = None) -> None:
    write_caps_document(path, CapSystemDocument.from_system(system, metadata))


def read_system(path) -> KoebeCapSystem:
    return read_caps_document(path).to_system()


def write_transform(path, T, metadata: dict | None = None) -> None:
    doc = TransformDocument(np.asarray(T, dtype=float), dict(metadata or {}))
    Path(path).write_text(_dump_json(doc.to_json()), encoding="utf-8")


def read_transform(path, tol: float = LORENTZ_TOL) -> TransformDocument:
    return parse_transform_document(_read_text(path), tol)


def obj_text(poly: EuclideanPolyhedron, name: str = "polyhedron") -> str:
    """Wavefront OBJ: vertices and face loops, then tangency points as a point group."""
    lines = [f"o {name}"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in poly.vertices.tolist()]
    lines += ["f " + " ".join(str(i + 1) for i in f) for f in poly.faces]
    n = len(poly.vertices)
    lines += ["o tangency_points", "g tangency_points"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in poly.tangency_points.tolist()]
    lines += [f"p {n + k + 1}" for k in range(len(poly.tangency_points))]
    return "\n".join(lines) + "\n"


def write_obj(path, poly: EuclideanPolyhedron, name: str = "polyhedron") -> None:
    Path(path).write_text(obj_text(poly, name), encoding="utf-8")


def read_obj(path):
    """Vertices, face loops and point elements of an OBJ file, grouped by object name."""
    objects, verts, cur = {}, [], None
    for line in _read_text(path).splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "o":
            cur = objects.setdefault(parts[1], {"faces": [], "points": []})
        elif parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            cur["faces"].append([int(t.split("/")[0]) - 1 for t in parts[1:]])
        elif parts[0] == "p":
            cur["points"].extend(int(t) - 1 for t in parts[1:])
    return np.array(verts), objects


def write_csv(path, columns, rows) -> None:
    """Rows are dicts or sequences in column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            vals = [row[c] for c in columns] if isinstance(row, dict) else list(row)
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in vals])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
