import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koebecenter import documents as D
from koebecenter import hypcore as hc
from koebecenter import koebe
from koebecenter.errors import DocumentError


def _same(a, b):
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def test_system_round_trip_bit_identical(perturbed, tmp_path):
    for (name, seed), s in perturbed.items():
        path = tmp_path / f"{name}{seed}.json"
        D.write_system(path, s, {"seed": seed})
        back = D.read_system(path)
        assert _same(back.vertex_centers, s.vertex_centers)
        assert _same(back.vertex_radii, s.vertex_radii)
        assert _same(back.face_centers, s.face_centers)
        assert _same(back.face_radii, s.face_radii)
        assert back.faces == s.faces
        assert back.name == name
        text = path.read_text()
        D.write_system(path, back, {"seed": seed})
        assert path.read_text() == text


@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False), min_size=16, max_size=16))
@settings(max_examples=50)
def test_transform_float_round_trip(values):
    M = np.array(values).reshape(4, 4)
    doc = D.TransformDocument(M)
    text = D._dump_json(doc.to_json())
    back = json.loads(text)["matrix"]
    assert _same(np.array(back), M)


def test_transform_round_trip(tmp_path):
    T = hc.random_mobius(11, 2.0)
    D.write_transform(tmp_path / "t.json", T, {"spec": "cm1"})
    doc = D.read_transform(tmp_path / "t.json")
    assert _same(doc.matrix, T)
    assert doc.metadata == {"spec": "cm1"}
    assert doc.dimension == 2


def test_transform_lorentz_check(tmp_path):
    T = hc.random_mobius(11, 1.0)
    T[0, 0] += 1e-4
    D.write_transform(tmp_path / "t.json", T)
    with pytest.raises(DocumentError, match="Minkowski"):
        D.read_transform(tmp_path / "t.json")


def test_caps_only_document(tmp_path):
    C = np.vstack([np.eye(4)[:3], -np.eye(4)[:3]])
    doc = D.CapSystemDocument.from_caps(C, np.full(6, 0.3), {"note": "six caps"})
    D.write_caps_document(tmp_path / "c.json", doc)
    back = D.read_caps_document(tmp_path / "c.json")
    assert back.caps_only and back.dimension == 3
    assert _same(back.vertex_centers, C)
    with pytest.raises(DocumentError):
        back.to_system()


def _doc(**changes):
    base = {"format": "koebe-caps/1", "dimension": 2,
            "vertex_caps": [{"center": [0, 0, 1], "radius": 0.5}] * 3,
            "face_caps": [{"center": [1, 0, 0], "radius": 0.5}],
            "faces": [[0, 1, 2]]}
    base.update(changes)
    return json.dumps(base)


@pytest.mark.parametrize("text", [
    "not json",
    _doc(format="koebe-caps/2"),
    _doc(extra=1),
    _doc(dimension=0),
    _doc(dimension=2.0),
    _doc(vertex_caps=[{"center": [0, 1], "radius": 0.5}]),
    _doc(vertex_caps=[{"center": [0, 0, 1], "radius": "0.5"}]),
    _doc(vertex_caps=[{"center": [0, 0, 1], "radius": 0.5, "color": "red"}]),
    _doc(faces=[[0, 1, 7]]),
    _doc(faces=[[0, 1]]),
    _doc(faces=[[0, 1, True]]),
    _doc(faces=[]),
    _doc(metadata=[1]),
    '{"format": "koebe-caps/1", "vertex_caps": [{"center": [0, 0, NaN], "radius": 0.5}]}',
    '{"format": "koebe-caps/1"}',
])
def test_strict_schema(text):
    with pytest.raises(DocumentError):
        D.parse_caps_document(text)


def test_missing_file():
    with pytest.raises(DocumentError):
        D.read_system("/nonexistent/doc.json")


def test_obj_export(canonical, tmp_path):
    s = canonical["tetrahedron"]
    P = koebe.reconstruct(s)
    D.write_obj(tmp_path / "t.obj", P, "tetrahedron")
    verts, objects = D.read_obj(tmp_path / "t.obj")
    assert set(objects) == {"tetrahedron", "tangency_points"}
    np.testing.assert_array_equal(verts[:4], P.vertices)
    assert objects["tetrahedron"]["faces"] == [list(f) for f in s.faces]
    pts = objects["tangency_points"]["points"]
    assert len(pts) == 6
    np.testing.assert_array_equal(verts[pts], P.tangency_points)
    for a, b in s.combinatorics.edges:
        assert np.linalg.norm(verts[a] - verts[b]) == pytest.approx(2 * np.sqrt(2), abs=1e-12)


def test_csv_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1 + 0.2, "c": "x"}, {"a": 2, "b": np.float64(1 / 3), "c": "y"}]
    D.write_csv(tmp_path / "r.csv", ["a", "b", "c"], rows)
    back = D.read_csv(tmp_path / "r.csv")
    assert float(back[0]["b"]) == 0.1 + 0.2
    assert float(back[1]["b"]) == 1 / 3
    assert back[1]["c"] == "y"
