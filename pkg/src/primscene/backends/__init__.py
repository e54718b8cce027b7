"""Wire contracts for the three neural services plus the scene renderer.

Every backend is reachable through the same four-method interface whether
it is the in-process deterministic mock or a remote HTTP model server.
Responses are re-validated against the response contract before anything
downstream sees them; violations surface as typed errors, never as corrupt
data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import NerfDataset
from ..errors import BackendRequestError, ContractViolationError
from ..geometry import CameraView, TriMesh


@dataclass
class StylizeRequest:
    image: np.ndarray  # float32 (H, W, 3) in [0, 1]
    prompt: str

    def validate(self) -> None:
        if not self.prompt or not self.prompt.strip():
            raise BackendRequestError("stylize prompt is empty")
        if self.image.size == 0:
            raise BackendRequestError("stylize image is empty")


@dataclass
class MeshGenRequest:
    image: np.ndarray

    def validate(self) -> None:
        if self.image.size == 0:
            raise BackendRequestError("mesh generation image is empty")


@dataclass
class GridEditRequest:
    color_grid: np.ndarray
    depth_grid: np.ndarray
    mask_grid: np.ndarray
    prompt: str
    rows: int
    cols: int
    tile_w: int
    tile_h: int
    blank_index: int

    def validate(self) -> None:
        if not self.prompt or not self.prompt.strip():
            raise BackendRequestError("grid edit prompt is empty")
        want = (self.rows * self.tile_h, self.cols * self.tile_w)
        for name, img in (
            ("color_grid", self.color_grid),
            ("depth_grid", self.depth_grid),
            ("mask_grid", self.mask_grid),
        ):
            if img.shape[:2] != want:
                raise BackendRequestError(
                    f"{name} is {img.shape[:2]}, layout says {want}"
                )


@dataclass
class RenderSceneRequest:
    view: CameraView


class ValidatedBackends:
    """Contract-enforcing wrapper around any backend implementation."""

    def __init__(self, inner):
        self._inner = inner
        # Mock editors need the caller to pre-composite the blank slot.
        self.prefills_blank_slot = bool(getattr(inner, "prefills_blank_slot", False))

    def stylize(self, req: StylizeRequest) -> np.ndarray:
        req.validate()
        out = self._inner.stylize(req)
        out = _as_color(out, "stylize")
        if out.shape[:2] != req.image.shape[:2]:
            raise ContractViolationError(
                f"stylize returned {out.shape[1]}x{out.shape[0]}, "
                f"expected {req.image.shape[1]}x{req.image.shape[0]}"
            )
        return out

    def generate_mesh(self, req: MeshGenRequest) -> TriMesh:
        req.validate()
        mesh = self._inner.generate_mesh(req)
        if not isinstance(mesh, TriMesh):
            raise ContractViolationError(
                f"mesh backend returned {type(mesh).__name__}, not a mesh"
            )
        try:
            mesh.validate()
        except ValueError as e:
            raise ContractViolationError(f"generated mesh invalid: {e}") from e
        lo, hi = mesh.bounds()
        if lo.min() < -0.5 - 1e-6 or hi.max() > 0.5 + 1e-6:
            raise ContractViolationError(
                f"generated mesh exceeds the unit box: bounds {lo} .. {hi}"
            )
        return mesh

    def edit_grid(self, req: GridEditRequest) -> np.ndarray:
        req.validate()
        out = self._inner.edit_grid(req)
        out = _as_color(out, "edit_grid")
        if out.shape[:2] != req.color_grid.shape[:2]:
            raise ContractViolationError(
                f"edit_grid returned {out.shape[1]}x{out.shape[0]}, "
                f"expected {req.color_grid.shape[1]}x{req.color_grid.shape[0]}"
            )
        return out

    def render_scene(self, req: RenderSceneRequest, ds: NerfDataset) -> np.ndarray:
        if len(ds) == 0:
            raise BackendRequestError("cannot render from an empty dataset")
        out = self._inner.render_scene(req, ds)
        out = _as_color(out, "render_scene")
        k = req.view.intrinsics
        if out.shape[:2] != (k.height, k.width):
            raise ContractViolationError(
                f"render_scene returned {out.shape[1]}x{out.shape[0]}, "
                f"expected {k.width}x{k.height}"
            )
        return out


def _as_color(img, op: str) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 3 or a.size == 0:
        raise ContractViolationError(f"{op} returned a non-RGB payload (shape {a.shape})")
    if a.dtype not in (np.uint8, np.float32, np.float64):
        raise ContractViolationError(f"{op} returned dtype {a.dtype}; expected float or uint8")
    if a.dtype != np.uint8 and not np.all(np.isfinite(a)):
        raise ContractViolationError(f"{op} returned non-finite pixels")
    return a


def make_backends(config) -> ValidatedBackends:
    """Build the backend bundle from a Config (all-"mock" or four URLs)."""
    from .http import HttpBackends
    from .mock import MockBackends

    urls = (
        config.stylizer_url,
        config.meshgen_url,
        config.grid_editor_url,
        config.renderer_url,
    )
    if all(u == "mock" for u in urls):
        return ValidatedBackends(MockBackends())
    if any(u == "mock" for u in urls):
        raise ValueError("backend endpoints must be all 'mock' or all URLs")
    return ValidatedBackends(HttpBackends(config))
