import json
import struct

import numpy as np
import numpy.testing as npt
import pytest

from primscene.backends.meshio import decode_glb, decode_mesh, decode_obj, encode_obj
from primscene.errors import ContractViolationError
from primscene.geometry import Pose, Primitive, PrimitiveKind, tessellate_primitive


def test_obj_round_trip_with_vertex_colors(rng):
    prim = Primitive(PrimitiveKind.SPHERE, Pose.identity(), np.array([0.4, 0.7, 0.3]))
    mesh = tessellate_primitive(prim, 6)
    mesh.vertex_colors[:] = rng.uniform(0, 1, size=mesh.vertex_colors.shape)
    back = decode_obj(encode_obj(mesh))
    npt.assert_array_equal(back.triangles, mesh.triangles)
    npt.assert_allclose(back.vertices, mesh.vertices, atol=1e-7)
    npt.assert_allclose(back.vertex_colors, mesh.vertex_colors, atol=1e-7)
    npt.assert_allclose(back.normals, mesh.normals, atol=1e-6)
    back.validate()


def test_obj_vertices_without_colors_default_to_gray():
    src = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    mesh = decode_obj(src)
    npt.assert_array_equal(mesh.vertex_colors, 0.5)


def test_obj_polygon_faces_fan_triangulate():
    src = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
    mesh = decode_obj(src)
    npt.assert_array_equal(mesh.triangles, [[0, 1, 2], [0, 2, 3]])


def test_obj_face_index_formats():
    # f v, f v/vt, f v/vt/vn, f v//vn all reference the same vertices.
    base = b"v 0 0 0\nv 1 0 0\nv 0 1 0\n"
    for face in (b"f 1 2 3\n", b"f 1/9 2/9 3/9\n", b"f 1/9/1 2/9/2 3/9/3\n", b"f 1//1 2//2 3//3\n"):
        mesh = decode_obj(base + b"vn 0 0 1\nvn 0 0 1\nvn 0 0 1\n" + face)
        npt.assert_array_equal(mesh.triangles, [[0, 1, 2]])


def test_obj_comments_and_blank_lines_ignored():
    src = b"# header\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\n# body\nf 1 2 3\n"
    assert len(decode_obj(src).triangles) == 1


def test_obj_parse_error_reports_line_number():
    src = b"v 0 0 0\nv 1 0\nv 0 1 0\nf 1 2 3\n"
    with pytest.raises(ContractViolationError, match="line 2"):
        decode_obj(src)
    with pytest.raises(ContractViolationError, match="line 4"):
        decode_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 x 3\n")


def test_obj_empty_payload_rejected():
    with pytest.raises(ContractViolationError, match="no vertices"):
        decode_obj(b"# nothing here\n")


def test_missing_normals_are_area_weighted():
    # Two coplanar-in-x triangles sharing vertex 0: one in the z=0 plane
    # (normal +z, area 2), one in the y=0 plane (normal -y, area 0.5).
    src = (
        b"v 0 0 0\nv 2 0 0\nv 0 2 0\n"
        b"v 1 0 0\nv 0 0 1\n"
        b"f 1 2 3\nf 1 4 5\n"
    )
    mesh = decode_obj(src)
    big = np.array([0.0, 0.0, 4.0])  # cross product = 2 * area * unit normal
    small = np.array([0.0, -1.0, 0.0])
    expected = big + small
    expected = expected / np.linalg.norm(expected)
    npt.assert_allclose(mesh.normals[0], expected, atol=1e-12)
    npt.assert_allclose(mesh.normals[1], [0, 0, 1], atol=1e-12)
    npt.assert_allclose(mesh.normals[4], [0, -1, 0], atol=1e-12)


# -- GLB ------------------------------------------------------------------------


def pad4(b: bytes, fill: bytes) -> bytes:
    return b + fill * (-len(b) % 4)


def build_glb(doc: dict, bin_chunk: bytes) -> bytes:
    jb = pad4(json.dumps(doc).encode(), b" ")
    bb = pad4(bin_chunk, b"\x00")
    chunks = struct.pack("<I4s", len(jb), b"JSON") + jb
    if bin_chunk:
        chunks += struct.pack("<I4s", len(bb), b"BIN\x00") + bb
    return b"glTF" + struct.pack("<II", 2, 12 + len(chunks)) + chunks


def quad_glb(indexed=True, with_normals=True, with_colors=True):
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=np.float32)
    normals = np.tile(np.array([0, 0, 1], dtype=np.float32), (4, 1))
    colors = np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0]], dtype=np.uint8)
    idx = np.array([0, 1, 2, 0, 2, 3], dtype=np.uint16)

    blobs, views, accessors, attrs = [], [], [], {}
    offset = 0

    def push(arr, component, kind, normalized=False):
        nonlocal offset
        raw = pad4(arr.tobytes(), b"\x00")
        views.append({"buffer": 0, "byteOffset": offset, "byteLength": len(raw)})
        acc = {
            "bufferView": len(views) - 1,
            "componentType": component,
            "count": len(arr),
            "type": kind,
        }
        if normalized:
            acc["normalized"] = True
        accessors.append(acc)
        blobs.append(raw)
        offset += len(raw)
        return len(accessors) - 1

    attrs["POSITION"] = push(verts, 5126, "VEC3")
    if with_normals:
        attrs["NORMAL"] = push(normals, 5126, "VEC3")
    if with_colors:
        attrs["COLOR_0"] = push(colors, 5121, "VEC3", normalized=True)
    prim = {"attributes": attrs}
    if indexed:
        prim["indices"] = push(idx, 5123, "SCALAR")
    else:
        verts_expanded = verts[idx]
        attrs["POSITION"] = push(verts_expanded.astype(np.float32), 5126, "VEC3")

    doc = {
        "asset": {"version": "2.0"},
        "meshes": [{"primitives": [prim]}],
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{"byteLength": offset}],
    }
    return build_glb(doc, b"".join(blobs)), verts, idx


def test_glb_indexed_quad_decodes():
    data, verts, idx = quad_glb()
    mesh = decode_glb(data)
    npt.assert_allclose(mesh.vertices, verts, atol=1e-7)
    npt.assert_array_equal(mesh.triangles, idx.reshape(-1, 3))
    npt.assert_allclose(mesh.normals, np.tile([0, 0, 1.0], (4, 1)), atol=1e-7)
    # COLOR_0 was normalized uint8: 255 -> 1.0 exactly.
    npt.assert_allclose(mesh.vertex_colors[0], [1, 0, 0], atol=1e-12)
    npt.assert_allclose(mesh.vertex_colors[3], [1, 1, 0], atol=1e-12)


def test_glb_without_indices_uses_sequential_triangles():
    data, _, _ = quad_glb(indexed=False)
    mesh = decode_glb(data)
    assert len(mesh.triangles) == 2
    npt.assert_array_equal(mesh.triangles, [[0, 1, 2], [3, 4, 5]])


def test_glb_without_normals_computes_them():
    data, _, _ = quad_glb(with_normals=False)
    mesh = decode_glb(data)
    npt.assert_allclose(mesh.normals, np.tile([0, 0, 1.0], (4, 1)), atol=1e-12)


def test_glb_without_colors_defaults_gray():
    data, _, _ = quad_glb(with_colors=False)
    npt.assert_array_equal(decode_glb(data).vertex_colors, 0.5)


def test_glb_interleaved_positions_respect_stride():
    # POSITION interleaved with a padding float: stride 16 bytes.
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=np.float32)
    inter = np.concatenate([verts, np.full((3, 1), 9.0, np.float32)], axis=1)
    blob = inter.tobytes()
    doc = {
        "asset": {"version": "2.0"},
        "meshes": [{"primitives": [{"attributes": {"POSITION": 0}}]}],
        "accessors": [{"bufferView": 0, "componentType": 5126, "count": 3, "type": "VEC3"}],
        "bufferViews": [{"buffer": 0, "byteOffset": 0, "byteLength": len(blob), "byteStride": 16}],
        "buffers": [{"byteLength": len(blob)}],
    }
    mesh = decode_glb(build_glb(doc, blob))
    npt.assert_allclose(mesh.vertices, verts, atol=1e-7)


def test_glb_bad_magic_rejected():
    with pytest.raises(ContractViolationError, match="magic"):
        decode_glb(b"NOPE" + b"\x00" * 20)


def test_glb_truncated_header_rejected():
    data, _, _ = quad_glb()
    clipped = bytearray(data)
    struct.pack_into("<I", clipped, 8, len(data) + 100)
    with pytest.raises(ContractViolationError, match="length"):
        decode_glb(bytes(clipped))


def test_glb_missing_json_chunk_rejected():
    data = b"glTF" + struct.pack("<II", 2, 12)
    with pytest.raises(ContractViolationError, match="JSON"):
        decode_glb(data)


def test_glb_missing_position_rejected():
    doc = {
        "asset": {"version": "2.0"},
        "meshes": [{"primitives": [{"attributes": {}}]}],
        "accessors": [],
        "bufferViews": [],
        "buffers": [],
    }
    with pytest.raises(ContractViolationError, match="POSITION"):
        decode_glb(build_glb(doc, b""))


def test_decode_mesh_sniffs_format():
    glb, verts, _ = quad_glb()
    assert len(decode_mesh(glb).vertices) == len(verts)
    obj = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    assert len(decode_mesh(obj).triangles) == 1
