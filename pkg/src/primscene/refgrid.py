"""Reference image grids: camera ring selection, tiling with one blank slot.

A reference grid tiles the condition renders (color / depth / mask) of a
ring of cameras around the object into single images, leaving one slot
blank for the grid editor to fill. Assembly and splitting are exact pixel
partitions; no resampling happens here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, GridLayoutError
from .geometry import CameraIntrinsics, CameraView, Pose, look_at_pose
from .images import (
    load_color_png,
    load_depth_png,
    load_mask_png,
    save_color_png,
    save_depth_png,
    save_mask_png,
    to_float,
)
from .raster import RenderOutput

BLANK_FILL = 0.5

DEFAULT_RING_RADIUS_MULTIPLIER = 2.5
DEFAULT_RING_ELEVATION_DEG = 20.0


@dataclass
class ReferenceGrid:
    rows: int
    cols: int
    tile_w: int
    tile_h: int
    blank_index: int
    color_grid: np.ndarray
    depth_grid: np.ndarray
    mask_grid: np.ndarray
    views: list[CameraView] = field(default_factory=list)

    def validate(self) -> None:
        n = self.rows * self.cols
        if not (0 <= self.blank_index < n):
            raise GridLayoutError(f"blank_index {self.blank_index} outside 0..{n - 1}")
        if len(self.views) != n - 1:
            raise GridLayoutError(f"expected {n - 1} views, got {len(self.views)}")
        want = (self.rows * self.tile_h, self.cols * self.tile_w)
        for name, img in (
            ("color_grid", self.color_grid),
            ("depth_grid", self.depth_grid),
            ("mask_grid", self.mask_grid),
        ):
            if img.shape[:2] != want:
                raise GridLayoutError(f"{name} is {img.shape[:2]}, expected {want}")

    def slot_box(self, index: int) -> tuple[int, int, int, int]:
        """(y0, y1, x0, x1) pixel bounds of a slot, row-major indexing."""
        r, c = divmod(index, self.cols)
        return r * self.tile_h, (r + 1) * self.tile_h, c * self.tile_w, (c + 1) * self.tile_w


def select_reference_cameras(
    centroid: np.ndarray,
    bound_radius: float,
    count: int,
    intrinsics: CameraIntrinsics,
    ring_radius_multiplier: float = DEFAULT_RING_RADIUS_MULTIPLIER,
    elevation_deg: float = DEFAULT_RING_ELEVATION_DEG,
) -> list[CameraView]:
    """Ring of cameras looking at the centroid, evenly spaced in azimuth.

    The ring sits at ring_radius_multiplier * bound_radius from the
    centroid, elevated above the world x-z plane (y up).
    """
    if bound_radius <= 0:
        raise ValueError(f"bound_radius must be positive, got {bound_radius}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    centroid = np.asarray(centroid, dtype=np.float64).reshape(3)
    radius = ring_radius_multiplier * bound_radius
    el = np.deg2rad(elevation_deg)
    views = []
    for k in range(count):
        az = 2.0 * np.pi * k / count
        eye = centroid + radius * np.array(
            [np.cos(el) * np.cos(az), np.sin(el), np.cos(el) * np.sin(az)]
        )
        pose = look_at_pose(eye, centroid, np.array([0.0, 1.0, 0.0]))
        views.append(CameraView(intrinsics, pose))
    return views


def assemble_grid(
    tiles: list[RenderOutput],
    views: list[CameraView],
    blank_index: int,
    rows: int,
    cols: int,
) -> ReferenceGrid:
    """Tile condition renders row-major, skipping the blank slot.

    The blank slot is filled with mid-gray color and zero depth/mask.
    """
    n = rows * cols
    if len(tiles) != n - 1:
        raise GridLayoutError(f"expected {n - 1} tiles for {rows}x{cols} grid, got {len(tiles)}")
    if len(views) != n - 1:
        raise GridLayoutError(f"expected {n - 1} views, got {len(views)}")
    if not (0 <= blank_index < n):
        raise GridLayoutError(f"blank_index {blank_index} outside 0..{n - 1}")

    th, tw = tiles[0].color.shape[:2]
    for i, t in enumerate(tiles):
        if t.color.shape[:2] != (th, tw) or t.depth.shape != (th, tw) or t.mask.shape != (th, tw):
            raise DimensionMismatchError(f"tile {i} dimensions disagree with tile 0 ({tw}x{th})")

    color = np.full((rows * th, cols * tw, 3), BLANK_FILL, dtype=np.float32)
    depth = np.zeros((rows * th, cols * tw), dtype=np.float32)
    mask = np.zeros((rows * th, cols * tw), dtype=np.uint8)

    grid = ReferenceGrid(rows, cols, tw, th, blank_index, color, depth, mask, list(views))
    ti = 0
    for slot in range(n):
        if slot == blank_index:
            continue
        y0, y1, x0, x1 = grid.slot_box(slot)
        color[y0:y1, x0:x1] = to_float(tiles[ti].color)
        depth[y0:y1, x0:x1] = tiles[ti].depth
        mask[y0:y1, x0:x1] = tiles[ti].mask
        ti += 1
    return grid


def split_grid(
    grid_image: np.ndarray, rows: int, cols: int, tile_w: int, tile_h: int
) -> list[np.ndarray]:
    """Cut a grid image into rows*cols tiles, row-major, blank slot included."""
    gh, gw = grid_image.shape[:2]
    if gh != rows * tile_h or gw != cols * tile_w:
        raise DimensionMismatchError(
            f"grid is {gw}x{gh}, expected {cols * tile_w}x{rows * tile_h} "
            f"for {rows}x{cols} tiles of {tile_w}x{tile_h}"
        )
    tiles = []
    for r in range(rows):
        for c in range(cols):
            tiles.append(
                grid_image[r * tile_h:(r + 1) * tile_h, c * tile_w:(c + 1) * tile_w].copy()
            )
    return tiles


def save_grid(grid: ReferenceGrid, out_dir: str | Path, stem: str) -> dict:
    """Persist a grid as three PNGs plus a metadata JSON; returns the metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_color_png(out / f"{stem}_color.png", grid.color_grid)
    save_mask_png(out / f"{stem}_mask.png", grid.mask_grid)
    depth_scale = save_depth_png(out / f"{stem}_depth.png", grid.depth_grid)
    meta = {
        "rows": grid.rows,
        "cols": grid.cols,
        "tile_w": grid.tile_w,
        "tile_h": grid.tile_h,
        "blank_index": grid.blank_index,
        "depth_scale": depth_scale,
        "views": [
            {
                "transform_matrix": v.pose.matrix().tolist(),
                "fl_x": v.intrinsics.fx,
                "fl_y": v.intrinsics.fy,
                "cx": v.intrinsics.cx,
                "cy": v.intrinsics.cy,
                "w": v.intrinsics.width,
                "h": v.intrinsics.height,
            }
            for v in grid.views
        ],
    }
    (out / f"{stem}_meta.json").write_text(json.dumps(meta, indent=2))
    return meta


def load_grid(in_dir: str | Path, stem: str) -> ReferenceGrid:
    src = Path(in_dir)
    meta = json.loads((src / f"{stem}_meta.json").read_text())
    color = to_float(load_color_png(src / f"{stem}_color.png"))
    mask = load_mask_png(src / f"{stem}_mask.png")
    depth = load_depth_png(src / f"{stem}_depth.png", meta["depth_scale"])
    views = [
        CameraView(
            CameraIntrinsics(
                fx=v["fl_x"], fy=v["fl_y"], cx=v["cx"], cy=v["cy"],
                width=v["w"], height=v["h"],
            ),
            Pose.from_matrix(np.asarray(v["transform_matrix"])),
        )
        for v in meta["views"]
    ]
    grid = ReferenceGrid(
        rows=meta["rows"], cols=meta["cols"],
        tile_w=meta["tile_w"], tile_h=meta["tile_h"],
        blank_index=meta["blank_index"],
        color_grid=color, depth_grid=depth, mask_grid=mask, views=views,
    )
    grid.validate()
    return grid
