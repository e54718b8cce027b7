"""Software z-buffer rasterizer producing color/depth/mask condition images.

Perspective-correct, deterministic: the nearest fragment wins and exact
depth ties fall to the lower (mesh index, triangle index). Fragments are
resolved by sorted keys, never by arrival order, so the output is identical
regardless of how work is batched. Back-face culling is off (generated
meshes are not guaranteed watertight) and shading is a fixed two-sided
headlight, so geometry reads regardless of winding.

Depth is the distance along the camera -z axis (not ray length), 0 where
no surface is hit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidClipRangeError
from .geometry import CameraView, TriMesh, invert
from .images import to_float, to_uint8

# Cap on candidate fragments resolved per batch; keeps peak memory flat for
# scenes with large screen-space triangles.
_FRAG_BATCH = 4_000_000


@dataclass
class RenderOutput:
    """color float32 (H,W,3) in [0,1]; depth float32 (H,W), 0=empty; mask uint8 {0,1}."""

    color: np.ndarray
    depth: np.ndarray
    mask: np.ndarray


def _clip_triangle_near(pts: np.ndarray, cols: np.ndarray, near: float):
    """Sutherland-Hodgman clip of one camera-space triangle against z = -near.

    Returns a list of (vertices (3,3), colors (3,3)) triangles (0, 1 or 2).
    """
    out_pts: list[np.ndarray] = []
    out_cols: list[np.ndarray] = []
    for i in range(3):
        a, b = pts[i], pts[(i + 1) % 3]
        ca, cb = cols[i], cols[(i + 1) % 3]
        a_in = a[2] <= -near
        b_in = b[2] <= -near
        if a_in:
            out_pts.append(a)
            out_cols.append(ca)
        if a_in != b_in:
            t = (-near - a[2]) / (b[2] - a[2])
            out_pts.append(a + t * (b - a))
            out_cols.append(ca + t * (cb - ca))
    if len(out_pts) < 3:
        return []
    tris = []
    for k in range(1, len(out_pts) - 1):
        tris.append(
            (
                np.stack([out_pts[0], out_pts[k], out_pts[k + 1]]),
                np.stack([out_cols[0], out_cols[k], out_cols[k + 1]]),
            )
        )
    return tris


def _gather_triangles(view: CameraView, meshes: list[TriMesh], near: float):
    """Camera-space triangle soup with shaded per-vertex colors and id columns."""
    w2c = invert(view.pose)
    fwd = view.pose.rotation @ np.array([0.0, 0.0, -1.0])

    pts_list, col_list, mesh_ids, tri_ids = [], [], [], []
    for mi, mesh in enumerate(meshes):
        if len(mesh.triangles) == 0:
            continue
        cam = w2c.apply(mesh.vertices)
        tri = mesh.triangles
        p = cam[tri]  # (T, 3, 3)

        # Two-sided headlight: per-face Lambert against the camera forward axis.
        wv = mesh.vertices[tri]
        fn = np.cross(wv[:, 1] - wv[:, 0], wv[:, 2] - wv[:, 0])
        ln = np.linalg.norm(fn, axis=1)
        ok = ln > 1e-15
        shade = np.zeros(len(tri))
        shade[ok] = np.abs(fn[ok] @ fwd) / ln[ok]
        c = mesh.vertex_colors[tri] * shade[:, None, None]

        inside = p[:, :, 2] <= -near
        n_in = inside.sum(axis=1)

        keep = n_in == 3
        if keep.any():
            pts_list.append(p[keep])
            col_list.append(c[keep])
            tri_ids.append(np.nonzero(keep)[0])
            mesh_ids.append(np.full(int(keep.sum()), mi))

        straddle = np.nonzero((n_in > 0) & (n_in < 3))[0]
        for ti in straddle:
            for cp, cc in _clip_triangle_near(p[ti], c[ti], near):
                pts_list.append(cp[None])
                col_list.append(cc[None])
                tri_ids.append(np.array([ti]))
                mesh_ids.append(np.array([mi]))

    if not pts_list:
        return None
    return (
        np.concatenate(pts_list),
        np.concatenate(col_list),
        np.concatenate(mesh_ids),
        np.concatenate(tri_ids),
    )


class _Buffers:
    """Global per-pixel winner state with the full (depth, mesh, tri) key."""

    def __init__(self, n_pix: int):
        self.depth = np.full(n_pix, np.inf)
        self.mesh = np.full(n_pix, np.iinfo(np.int64).max, dtype=np.int64)
        self.tri = np.full(n_pix, np.iinfo(np.int64).max, dtype=np.int64)
        self.color = np.zeros((n_pix, 3))

    def merge(self, pix, d, mesh, tri, color):
        old_d = self.depth[pix]
        old_m = self.mesh[pix]
        old_t = self.tri[pix]
        better = (d < old_d) | (
            (d == old_d) & ((mesh < old_m) | ((mesh == old_m) & (tri < old_t)))
        )
        sel = pix[better]
        self.depth[sel] = d[better]
        self.mesh[sel] = mesh[better]
        self.tri[sel] = tri[better]
        self.color[sel] = color[better]


def render_meshes(
    view: CameraView, meshes: list[TriMesh], near: float, far: float
) -> RenderOutput:
    """Z-buffered render of world-space meshes through a pinhole view."""
    if not (0 < near < far):
        raise InvalidClipRangeError(f"need 0 < near < far, got near={near}, far={far}")

    k = view.intrinsics
    w, h = k.width, k.height
    buf = _Buffers(h * w)

    gathered = _gather_triangles(view, meshes, near)
    if gathered is not None:
        pts, cols, mesh_ids, tri_ids = gathered
        d = -pts[:, :, 2]  # (T, 3), all >= near after clipping
        su = k.cx + k.fx * pts[:, :, 0] / d
        sv = k.cy - k.fy * pts[:, :, 1] / d

        # Pixel centers sit at integer coordinates.
        x0 = np.maximum(np.ceil(su.min(axis=1)), 0).astype(np.int64)
        x1 = np.minimum(np.floor(su.max(axis=1)), w - 1).astype(np.int64)
        y0 = np.maximum(np.ceil(sv.min(axis=1)), 0).astype(np.int64)
        y1 = np.minimum(np.floor(sv.max(axis=1)), h - 1).astype(np.int64)
        bw = x1 - x0 + 1
        bh = y1 - y0 + 1

        denom = (sv[:, 1] - sv[:, 2]) * (su[:, 0] - su[:, 2]) + (
            su[:, 2] - su[:, 1]
        ) * (sv[:, 0] - sv[:, 2])
        live = (bw > 0) & (bh > 0) & (np.abs(denom) > 1e-12)

        idx_live = np.nonzero(live)[0]
        if len(idx_live):
            areas = (bw[idx_live] * bh[idx_live]).astype(np.int64)
            csum = np.cumsum(areas)
            start = 0
            while start < len(idx_live):
                base = csum[start - 1] if start else 0
                stop = int(np.searchsorted(csum, base + _FRAG_BATCH)) + 1
                stop = max(stop, start + 1)
                _rasterize_batch(
                    idx_live[start:stop], su, sv, d, cols, mesh_ids, tri_ids,
                    denom, x0, y0, bw, bh, w, near, far, buf,
                )
                start = stop

    hit = np.isfinite(buf.depth)
    depth = np.zeros(h * w, dtype=np.float32)
    depth[hit] = buf.depth[hit]
    color = np.zeros((h * w, 3), dtype=np.float32)
    color[hit] = np.clip(buf.color[hit], 0.0, 1.0)
    return RenderOutput(
        color=color.reshape(h, w, 3),
        depth=depth.reshape(h, w),
        mask=hit.reshape(h, w).astype(np.uint8),
    )


def _rasterize_batch(
    tsel, su, sv, d, cols, mesh_ids, tri_ids, denom,
    x0, y0, bw, bh, w, near, far, buf: _Buffers,
):
    areas = (bw[tsel] * bh[tsel]).astype(np.int64)
    total = int(areas.sum())
    if total == 0:
        return
    # Ragged bbox expansion: one row per candidate fragment.
    frag_tri = np.repeat(np.arange(len(tsel)), areas)
    offsets = np.concatenate([[0], np.cumsum(areas)[:-1]])
    local = np.arange(total) - np.repeat(offsets, areas)
    t = tsel[frag_tri]
    px = (x0[t] + local % bw[t]).astype(np.float64)
    py = (y0[t] + local // bw[t]).astype(np.float64)

    inv_den = 1.0 / denom[t]
    dx2 = px - su[t, 2]
    dy2 = py - sv[t, 2]
    l0 = ((sv[t, 1] - sv[t, 2]) * dx2 + (su[t, 2] - su[t, 1]) * dy2) * inv_den
    l1 = ((sv[t, 2] - sv[t, 0]) * dx2 + (su[t, 0] - su[t, 2]) * dy2) * inv_den
    l2 = 1.0 - l0 - l1

    keep = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    if not keep.any():
        return
    t = t[keep]
    px = px[keep]
    py = py[keep]
    l0, l1, l2 = l0[keep], l1[keep], l2[keep]

    # Perspective-correct interpolation via 1/depth.
    w0 = l0 / d[t, 0]
    w1 = l1 / d[t, 1]
    w2 = l2 / d[t, 2]
    df = 1.0 / (w0 + w1 + w2)
    cf = (
        cols[t, 0] * w0[:, None] + cols[t, 1] * w1[:, None] + cols[t, 2] * w2[:, None]
    ) * df[:, None]

    in_range = (df > near) & (df < far)
    if not in_range.any():
        return
    t = t[in_range]
    pix = (py[in_range].astype(np.int64) * w + px[in_range].astype(np.int64))
    df = df[in_range]
    cf = cf[in_range]
    fm = mesh_ids[t]
    ft = tri_ids[t]

    # Deterministic winner per pixel within the batch, then merge globally.
    order = np.lexsort((ft, fm, df, pix))
    pix = pix[order]
    first = np.ones(len(pix), dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    sel = order[first]
    buf.merge(pix[first], df[order][first], fm[sel], ft[sel], cf[sel])


def composite_over(base: np.ndarray, overlay: RenderOutput) -> np.ndarray:
    """Replace base pixels with overlay color wherever the overlay mask is set.

    Returns the same dtype as base; base is not mutated.
    """
    base = np.asarray(base)
    if base.shape[:2] != overlay.mask.shape:
        raise DimensionMismatchError(
            f"base {base.shape[:2]} vs overlay {overlay.mask.shape}"
        )
    out = base.copy()
    m = overlay.mask.astype(bool)
    if base.dtype == np.uint8:
        out[m] = to_uint8(overlay.color)[m]
    else:
        out[m] = to_float(overlay.color)[m]
    return out
