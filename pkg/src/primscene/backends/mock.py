"""Deterministic in-process stand-ins for the neural services.

Each mock is a pure function of its request, so pipeline runs are exactly
reproducible and tests can predict every byte of output. The stylizer tints
by a prompt-derived gain, the mesh generator always answers with a sphere
colored like the input image, the grid editor is the identity, and the scene
renderer replays the dataset frame whose camera is closest to the query.
"""

from __future__ import annotations

import numpy as np

from ..dataset import NerfDataset
from ..geometry import (
    Pose,
    Primitive,
    PrimitiveKind,
    TriMesh,
    geodesic_angle,
    tessellate_primitive,
)
from ..images import to_float
from . import GridEditRequest, MeshGenRequest, RenderSceneRequest, StylizeRequest

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_MESH_LEVEL = 32


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def prompt_gains(prompt: str) -> np.ndarray:
    """Per-channel gain in [0.5, 1.0] derived from the prompt hash.

    Channel c reads byte c of the hash (little-endian) and maps 0..255
    onto 0.5..1.0, so distinct prompts tint distinctly but never darken
    below half intensity.
    """
    h = fnv1a64(prompt.encode("utf-8"))
    raw = np.array([(h >> (8 * c)) & 0xFF for c in range(3)], dtype=np.float64)
    return (0.5 + 0.5 * raw / 255.0).astype(np.float32)


class MockBackends:
    """The all-mock backend bundle (see module docstring)."""

    # The identity editor leaves the blank slot untouched, so the caller
    # composites its own preview into that slot before sending the grid.
    prefills_blank_slot = True

    def stylize(self, req: StylizeRequest) -> np.ndarray:
        img = to_float(req.image)
        gains = prompt_gains(req.prompt)
        return np.clip(img * gains, 0.0, 1.0).astype(np.float32)

    def generate_mesh(self, req: MeshGenRequest) -> TriMesh:
        prim = Primitive(PrimitiveKind.SPHERE, Pose.identity(), np.full(3, 0.5))
        mesh = tessellate_primitive(prim, level=_MESH_LEVEL)
        color = np.clip(to_float(req.image).reshape(-1, 3).mean(axis=0), 0.0, 1.0)
        mesh.vertex_colors[:] = color
        return mesh

    def edit_grid(self, req: GridEditRequest) -> np.ndarray:
        return np.asarray(req.color_grid).copy()

    def render_scene(self, req: RenderSceneRequest, ds: NerfDataset) -> np.ndarray:
        q = req.view.pose
        best, best_d = 0, np.inf
        for i in range(len(ds)):
            p = ds.frames[i].transform
            d = float(np.linalg.norm(p.translation - q.translation))
            d += geodesic_angle(p.rotation, q.rotation)
            if d < best_d:
                best, best_d = i, d
        return to_float(ds.load_image(best))
