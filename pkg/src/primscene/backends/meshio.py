"""Mesh wire codec: OBJ with per-vertex colors, plus a minimal GLB reader.

The OBJ flavor is the de-facto vertex-color extension: `v x y z r g b`.
GLB decoding covers the common single-primitive case real reconstruction
services emit (float POSITION/NORMAL, indexed triangles, optional COLOR_0).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ContractViolationError
from ..geometry import TriMesh

GLB_MAGIC = b"glTF"

_COMPONENT_DTYPES = {
    5120: np.int8,
    5121: np.uint8,
    5122: np.int16,
    5123: np.uint16,
    5125: np.uint32,
    5126: np.float32,
}
_TYPE_WIDTHS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4}


def encode_obj(mesh: TriMesh) -> bytes:
    lines = []
    for v, c in zip(mesh.vertices, mesh.vertex_colors):
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {c[0]:.9g} {c[1]:.9g} {c[2]:.9g}")
    for n in mesh.normals:
        lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1}//{t[0] + 1} {t[1] + 1}//{t[1] + 1} {t[2] + 1}//{t[2] + 1}")
    return ("\n".join(lines) + "\n").encode()


def decode_obj(data: bytes) -> TriMesh:
    verts, colors, normals, tris = [], [], [], []
    for ln, raw in enumerate(data.decode("utf-8", errors="replace").splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        try:
            if tag == "v":
                vals = [float(x) for x in parts[1:]]
                if len(vals) not in (3, 6):
                    raise ValueError(f"vertex needs 3 or 6 floats, got {len(vals)}")
                verts.append(vals[:3])
                colors.append(vals[3:6] if len(vals) == 6 else [0.5, 0.5, 0.5])
            elif tag == "vn":
                normals.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    tris.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError) as e:
            raise ContractViolationError(f"OBJ parse error at line {ln}: {e}") from e

    if not verts:
        raise ContractViolationError("OBJ payload has no vertices")
    verts = np.asarray(verts, dtype=np.float64)
    if len(normals) != len(verts):
        normals = _vertex_normals(verts, np.asarray(tris, dtype=np.int64))
    return TriMesh(verts, np.asarray(normals), np.asarray(tris, dtype=np.int64), np.asarray(colors))


def _vertex_normals(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    n = np.zeros_like(verts)
    if len(tris):
        fv = verts[tris]
        fn = np.cross(fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0])  # area-weighted
        for k in range(3):
            np.add.at(n, tris[:, k], fn)
    lens = np.linalg.norm(n, axis=1, keepdims=True)
    lens[lens < 1e-15] = 1.0
    out = n / lens
    # isolated vertices get an arbitrary unit normal
    out[(n == 0).all(axis=1)] = [0.0, 1.0, 0.0]
    return out


def _read_accessor(doc: dict, bin_chunk: bytes, idx: int) -> np.ndarray:
    acc = doc["accessors"][idx]
    view = doc["bufferViews"][acc["bufferView"]]
    dtype = _COMPONENT_DTYPES[acc["componentType"]]
    width = _TYPE_WIDTHS[acc["type"]]
    offset = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
    count = acc["count"]
    stride = view.get("byteStride")
    itemsize = np.dtype(dtype).itemsize * width
    if stride and stride != itemsize:
        rows = []
        for i in range(count):
            start = offset + i * stride
            rows.append(np.frombuffer(bin_chunk, dtype=dtype, count=width, offset=start))
        arr = np.stack(rows)
    else:
        arr = np.frombuffer(bin_chunk, dtype=dtype, count=count * width, offset=offset)
        arr = arr.reshape(count, width) if width > 1 else arr
    if acc.get("normalized") and np.issubdtype(dtype, np.integer):
        arr = arr.astype(np.float64) / np.iinfo(dtype).max
    return arr


def decode_glb(data: bytes) -> TriMesh:
    if len(data) < 12 or data[:4] != GLB_MAGIC:
        raise ContractViolationError("not a GLB payload (bad magic)")
    _, length = struct.unpack_from("<II", data, 4)
    if length > len(data):
        raise ContractViolationError("GLB header length exceeds payload")

    pos = 12
    json_doc, bin_chunk = None, b""
    while pos + 8 <= length:
        clen, ctype = struct.unpack_from("<I4s", data, pos)
        body = data[pos + 8:pos + 8 + clen]
        if ctype == b"JSON":
            json_doc = json.loads(body)
        elif ctype == b"BIN\x00":
            bin_chunk = body
        pos += 8 + clen
    if json_doc is None:
        raise ContractViolationError("GLB payload has no JSON chunk")

    try:
        prim = json_doc["meshes"][0]["primitives"][0]
        attrs = prim["attributes"]
        verts = _read_accessor(json_doc, bin_chunk, attrs["POSITION"]).astype(np.float64)
        if "indices" in prim:
            tris = _read_accessor(json_doc, bin_chunk, prim["indices"]).astype(np.int64)
            tris = tris.reshape(-1, 3)
        else:
            tris = np.arange(len(verts), dtype=np.int64).reshape(-1, 3)
        if "NORMAL" in attrs:
            normals = _read_accessor(json_doc, bin_chunk, attrs["NORMAL"]).astype(np.float64)
            lens = np.linalg.norm(normals, axis=1, keepdims=True)
            lens[lens < 1e-15] = 1.0
            normals = normals / lens
        else:
            normals = _vertex_normals(verts, tris)
        if "COLOR_0" in attrs:
            colors = np.asarray(_read_accessor(json_doc, bin_chunk, attrs["COLOR_0"]), dtype=np.float64)
            colors = np.clip(colors[:, :3], 0.0, 1.0)
        else:
            colors = np.full((len(verts), 3), 0.5)
    except (KeyError, IndexError) as e:
        raise ContractViolationError(f"unsupported GLB structure: missing {e}") from e

    return TriMesh(verts, normals, tris, colors)


def decode_mesh(data: bytes) -> TriMesh:
    """Sniff the payload format and decode (GLB magic, else OBJ text)."""
    if data[:4] == GLB_MAGIC:
        return decode_glb(data)
    return decode_obj(data)
