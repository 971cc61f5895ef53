import json
import os
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from manifold_profiler.errors import (
    BadMagic,
    InconsistentN,
    IoFailure,
    MissingLayerFile,
    NonFiniteValue,
    NonNumericCell,
    RaggedRows,
    SchemaError,
    TruncatedFile,
    UnsupportedVersion,
)
from manifold_profiler.tensor_io import (
    PointCloud,
    read_csv,
    read_header,
    read_manifest,
    read_pointcloud,
    write_manifest,
    write_pointcloud,
)


def raw_file(path, n, d, values, dtype_code=2, version=1, magic=b"IDPC"):
    fmt = "<f8" if dtype_code == 2 else "<f4"
    header = magic + bytes([version, dtype_code, 0, 0]) + struct.pack("<QQ", n, d)
    path.write_bytes(header + np.asarray(values, dtype=fmt).tobytes())
    return path


def test_read_handmade_file(tmp_path):
    p = raw_file(tmp_path / "a.idpc", 2, 3, [0, 0, 0, 1, 1, 1])
    c = read_pointcloud(p)
    assert c.n_points == 2 and c.dim == 3
    np.testing.assert_array_equal(c.data, [[0, 0, 0], [1, 1, 1]])
    assert c.data.dtype == np.float64


def test_f32_encoding_of_3_5(tmp_path):
    p = tmp_path / "x.idpc"
    write_pointcloud(PointCloud([[3.5]]), p, "f32")
    raw = p.read_bytes()
    assert raw[:8] == b"IDPC\x01\x01\x00\x00"
    assert struct.unpack("<QQ", raw[8:24]) == (1, 1)
    assert raw[24:] == bytes([0x00, 0x00, 0x60, 0x40])


def test_f64_round_trip_of_point_one(tmp_path):
    p = tmp_path / "x.idpc"
    write_pointcloud(PointCloud([[0.1, -0.1]]), p, "f64")
    assert read_pointcloud(p).data.tobytes() == np.array([[0.1, -0.1]]).tobytes()


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_f64_round_trip_bitwise(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("rt") / "c.idpc"
    write_pointcloud(PointCloud(a), p, "f64")
    assert read_pointcloud(p).data.tobytes() == np.ascontiguousarray(a).tobytes()


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(-1e30, 1e30, allow_nan=False)))
def test_f32_round_trip_is_nearest_float32(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("rt") / "c.idpc"
    write_pointcloud(PointCloud(a), p, "f32")
    back = read_pointcloud(p).data
    expected = a.astype(np.float32).astype(np.float64)
    np.testing.assert_array_equal(back, expected)
    # within one float32 ulp of the original
    assert np.all(np.abs(back - a) <= np.spacing(np.abs(a).astype(np.float32)).astype(np.float64))


def test_truncated_payload(tmp_path):
    p = raw_file(tmp_path / "t.idpc", 2, 3, [0, 0, 0, 1, 1, 1])
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(TruncatedFile):
        read_pointcloud(p)


def test_truncated_header(tmp_path):
    p = tmp_path / "t.idpc"
    p.write_bytes(b"IDPC\x01\x02")
    with pytest.raises(TruncatedFile):
        read_pointcloud(p)


def test_bad_magic_and_version(tmp_path):
    with pytest.raises(BadMagic):
        read_pointcloud(raw_file(tmp_path / "m.idpc", 1, 1, [1.0], magic=b"NOPE"))
    with pytest.raises(UnsupportedVersion):
        read_pointcloud(raw_file(tmp_path / "v.idpc", 1, 1, [1.0], version=2))
    with pytest.raises(UnsupportedVersion):
        read_pointcloud(raw_file(tmp_path / "d.idpc", 1, 1, [1.0], dtype_code=7))


def test_non_finite_reports_first_position(tmp_path):
    p = raw_file(tmp_path / "n.idpc", 3, 2, [0, 1, 2, np.inf, np.nan, 5])
    with pytest.raises(NonFiniteValue) as info:
        read_pointcloud(p)
    assert (info.value.row, info.value.col) == (1, 1)


def test_reading_does_not_modify_file(tmp_path):
    p = raw_file(tmp_path / "a.idpc", 2, 2, [1, 2, 3, 4])
    before = p.read_bytes()
    read_pointcloud(p)
    assert p.read_bytes() == before


def test_loaded_cloud_is_read_only(tmp_path):
    c = read_pointcloud(raw_file(tmp_path / "a.idpc", 2, 2, [1, 2, 3, 4]))
    with pytest.raises(ValueError):
        c.data[0, 0] = 9.0


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores file permissions")
def test_write_to_read_only_dir(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    with pytest.raises(IoFailure):
        write_pointcloud(PointCloud([[1.0]]), d / "x.idpc")


def test_write_to_missing_dir():
    with pytest.raises(IoFailure):
        write_pointcloud(PointCloud([[1.0]]), "/nonexistent-dir/x.idpc")


def test_read_csv(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(read_csv(p).data, [[1, 2], [3, 4]])
    p.write_text("a,b\n1,2\n")
    c = read_csv(p, has_header=True)
    assert (c.n_points, c.dim) == (1, 2)
    p.write_text("1,2\n3\n")
    with pytest.raises(RaggedRows):
        read_csv(p)
    p.write_text("1,x\n")
    with pytest.raises(NonNumericCell):
        read_csv(p)


def _layers(tmp_path, ns):
    files = []
    for i, n in enumerate(ns):
        name = f"l{i}.idpc"
        write_pointcloud(PointCloud(np.arange(n * 2, dtype=float).reshape(n, 2)), tmp_path / name)
        files.append((i, name))
    return files


def test_manifest_sorted(tmp_path):
    files = _layers(tmp_path, [4] * 33)
    write_manifest(tmp_path / "m.json", "pythia", "pile", list(reversed(files)), surprisal=2.5)
    m = read_manifest(tmp_path / "m.json")
    assert m.indices == list(range(33))
    assert m.surprisal == 2.5
    assert m.load(5).n_points == 4


def test_manifest_duplicate_index(tmp_path):
    files = _layers(tmp_path, [4, 4])
    write_manifest(tmp_path / "m.json", "m", "c", [(0, files[0][1]), (0, files[1][1])])
    with pytest.raises(SchemaError) as info:
        read_manifest(tmp_path / "m.json")
    assert info.value.field == "layers"


def test_manifest_inconsistent_n(tmp_path):
    files = _layers(tmp_path, [4, 5])
    write_manifest(tmp_path / "m.json", "m", "c", files)
    with pytest.raises(InconsistentN):
        read_manifest(tmp_path / "m.json")


def test_manifest_missing_file(tmp_path):
    write_manifest(tmp_path / "m.json", "m", "c", [(0, "nope.idpc")])
    with pytest.raises(MissingLayerFile):
        read_manifest(tmp_path / "m.json")


@pytest.mark.parametrize("doc, field", [
    ({"corpus": "c", "layers": [{"index": 0, "file": "f"}]}, "model"),
    ({"model": "m", "corpus": "c", "layers": []}, "layers"),
    ({"model": "m", "corpus": "c", "layers": [{"index": -1, "file": "f"}]}, "layers[0].index"),
    ({"model": "m", "corpus": "c", "layers": [{"index": 0}]}, "layers[0].file"),
    ({"model": "m", "corpus": "c", "surprisal": -1, "layers": [{"index": 0, "file": "f"}]}, "surprisal"),
])
def test_manifest_schema_errors(tmp_path, doc, field):
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as info:
        read_manifest(tmp_path / "m.json")
    assert info.value.field == field


def test_header_only(tmp_path):
    raw_file(tmp_path / "a.idpc", 2, 3, [0] * 6, dtype_code=2)
    dtype, n, d = read_header(tmp_path / "a.idpc")
    assert (n, d) == (2, 3)
