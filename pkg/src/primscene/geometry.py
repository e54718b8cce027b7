"""Pose algebra, pinhole projection, and primitive tessellation.

Coordinate conventions (fixed once, asserted in tests):

  World frame: right-handed, y up. Scene units are whatever the capture
  used (meters for phone captures); all tolerances are relative to them.

  Camera frame: right-handed, camera looks along local -z, y up. Poses are
  camera-to-world (the per-frame transform matrix convention of Nerfstudio
  datasets).

  Image frame: pixel origin top-left, u right, v down. +y in camera space
  maps to smaller v. Pixel centers sit at integer coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirectionError

# Points with camera-space z >= -EPS_NEAR count as behind the camera.
EPS_NEAR = 1e-6

_ORTHO_TOL = 1e-6


class PrimitiveKind(enum.Enum):
    BOX = "box"
    SPHERE = "sphere"
    CYLINDER = "cylinder"


@dataclass
class Pose:
    """Rigid transform: x_world = rotation @ x_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    def validate(self, tol: float = _ORTHO_TOL) -> None:
        """Check the rotation is orthonormal with determinant +1."""
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > tol:
            raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        det = float(np.linalg.det(self.rotation))
        if det < 0:
            raise ValueError(f"rotation has determinant {det:.6f}; reflections are not poses")

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return Pose(m[:3, :3], m[:3, 3])

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array (or a single 3-vector) into the parent frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    """Pose applying b first, then a: (a o b)(x) = a(b(x))."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def pose_distance(a: Pose, b: Pose, rotation_weight: float = 1.0) -> float:
    """Translation distance plus weighted geodesic rotation angle (radians).

    The default weight equates 1 radian with 1 scene unit.
    """
    dt = float(np.linalg.norm(a.translation - b.translation))
    return dt + rotation_weight * geodesic_angle(a.rotation, b.rotation)


def geodesic_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Angle of the relative rotation between two rotation matrices, in radians."""
    c = (np.trace(r1.T @ r2) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Shared pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    def scaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Intrinsics for the same camera rendered at a different resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(
            fx=self.fx * sx, fy=self.fy * sy,
            cx=self.cx * sx, cy=self.cy * sy,
            width=width, height=height,
        )


@dataclass
class CameraView:
    """A pinhole camera: intrinsics plus camera-to-world pose."""

    intrinsics: CameraIntrinsics
    pose: Pose

    def scaled(self, width: int, height: int) -> "CameraView":
        return CameraView(self.intrinsics.scaled(width, height), self.pose)


@dataclass
class Primitive:
    """User-placed proxy shape. scale holds per-axis half-extents.

    For spheres the components are semi-axis radii; for cylinders scale
    y is the half-height and x/z the cap radii (axis along local y).
    Validation is deferred to the operations that consume the primitive so
    malformed input produces a typed error there, not at construction.
    """

    kind: PrimitiveKind
    pose: Pose
    scale: np.ndarray

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = PrimitiveKind(self.kind)
        self.scale = np.asarray(self.scale, dtype=np.float64).reshape(3)


@dataclass
class TriMesh:
    """Indexed triangle mesh with unit vertex normals and RGB vertex colors in [0,1]."""

    vertices: np.ndarray
    normals: np.ndarray
    triangles: np.ndarray
    vertex_colors: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.vertex_colors = np.asarray(self.vertex_colors, dtype=np.float64).reshape(-1, 3)

    def validate(self) -> None:
        nv = len(self.vertices)
        if nv < 4 or len(self.triangles) < 4:
            raise ValueError(
                f"mesh too small: {nv} vertices, {len(self.triangles)} triangles (need >= 4 of each)"
            )
        if len(self.normals) != nv or len(self.vertex_colors) != nv:
            raise ValueError("normals and vertex_colors must be per-vertex")
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("mesh vertices contain non-finite values")
        if self.triangles.min() < 0 or self.triangles.max() >= nv:
            raise ValueError(
                f"triangle index out of range (vertex count {nv}, "
                f"max index {int(self.triangles.max())})"
            )
        lens = np.linalg.norm(self.normals, axis=1)
        if not np.all(np.isfinite(lens)) or np.abs(lens - 1.0).max() > 1e-4:
            raise ValueError("normals must be unit length within 1e-4")
        if self.vertex_colors.min() < 0 or self.vertex_colors.max() > 1:
            raise ValueError("vertex colors must lie in [0, 1]")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box as (min, max) corners."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, pose: Pose, scale: np.ndarray | float = 1.0) -> "TriMesh":
        """Apply per-axis scale in the local frame, then the pose."""
        s = np.broadcast_to(np.asarray(scale, dtype=np.float64), (3,))
        verts = pose.apply(self.vertices * s)
        # Normals transform with the inverse-transpose: divide by scale, re-normalize.
        n = (self.normals / s) @ pose.rotation.T
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
        return TriMesh(verts, n, self.triangles.copy(), self.vertex_colors.copy())


def project_point(view: CameraView, p_world: np.ndarray) -> tuple[float, float] | None:
    """Project a world point to pixel coordinates; None if at/behind the camera.

    The result may lie outside the image bounds; clipping is the caller's job.
    """
    cam = invert(view.pose).apply(np.asarray(p_world, dtype=np.float64))
    z = cam[2]
    if z >= -EPS_NEAR:
        return None
    k = view.intrinsics
    u = k.cx + k.fx * (cam[0] / -z)
    v = k.cy - k.fy * (cam[1] / -z)
    return float(u), float(v)


def unproject_point(view: CameraView, u: float, v: float, depth: float) -> np.ndarray:
    """World point whose projection is (u, v) at the given -z distance."""
    k = view.intrinsics
    x = (u - k.cx) * depth / k.fx
    y = (k.cy - v) * depth / k.fy
    return view.pose.apply(np.array([x, y, -depth]))


def look_at_pose(eye: np.ndarray, target: np.ndarray, up_hint: np.ndarray) -> Pose:
    """Camera-to-world pose at eye with local -z pointing toward target."""
    eye = np.asarray(eye, dtype=np.float64).reshape(3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    up_hint = np.asarray(up_hint, dtype=np.float64).reshape(3)

    fwd = target - eye
    d = np.linalg.norm(fwd)
    if d <= 1e-9:
        raise DegenerateDirectionError(f"eye and target coincide (|target - eye| = {d:.3e})")
    fwd = fwd / d

    un = np.linalg.norm(up_hint)
    if un <= 1e-9:
        raise DegenerateDirectionError("up_hint has zero length")
    right = np.cross(fwd, up_hint / un)
    rn = np.linalg.norm(right)
    if rn < 1e-6:
        raise DegenerateDirectionError("up_hint is parallel to the view direction")
    right = right / rn
    up = np.cross(right, fwd)

    rot = np.column_stack([right, up, -fwd])
    return Pose(rot, eye)


def _pose_scale_apply(mesh: TriMesh, prim: Primitive) -> TriMesh:
    return mesh.transformed(prim.pose, prim.scale)


def _sphere_unit(level: int) -> TriMesh:
    """Unit UV-sphere: 4*level longitudes, 2*level latitude bands, shared seam."""
    n_lon = 4 * level
    n_lat = 2 * level

    verts = [np.array([0.0, 1.0, 0.0])]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        st, ct = np.sin(theta), np.cos(theta)
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(np.array([st * np.cos(phi), ct, st * np.sin(phi)]))
    verts.append(np.array([0.0, -1.0, 0.0]))
    verts = np.array(verts)

    def ring(i, j):  # i in [1, n_lat-1], j wraps
        return 1 + (i - 1) * n_lon + (j % n_lon)

    south = len(verts) - 1
    tris = []
    for j in range(n_lon):  # pole caps
        tris.append([0, ring(1, j + 1), ring(1, j)])
        tris.append([south, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)])
    for i in range(1, n_lat - 1):  # body quads
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, b, d])
            tris.append([a, d, c])

    normals = verts.copy()  # unit sphere: normal == position
    colors = np.full_like(verts, 0.5)
    return TriMesh(verts, normals, np.array(tris), colors)


def _box_unit(level: int) -> TriMesh:
    """Unit box [-1,1]^3; each face a level x level grid, vertices duplicated per face."""
    verts, normals, tris = [], [], []
    # (normal axis, sign, u axis, v axis) per face
    faces = [
        (0, +1, 1, 2), (0, -1, 2, 1),
        (1, +1, 2, 0), (1, -1, 0, 2),
        (2, +1, 0, 1), (2, -1, 1, 0),
    ]
    for axis, sign, ua, va in faces:
        base = len(verts)
        n = np.zeros(3)
        n[axis] = sign
        for i in range(level + 1):
            for j in range(level + 1):
                p = np.zeros(3)
                p[axis] = sign
                p[ua] = -1 + 2 * i / level
                p[va] = -1 + 2 * j / level
                verts.append(p)
                normals.append(n)
        for i in range(level):
            for j in range(level):
                a = base + i * (level + 1) + j
                b = a + (level + 1)
                # u cross v == outward normal for the chosen axis ordering
                tris.append([a, b, b + 1])
                tris.append([a, b + 1, a + 1])
    verts = np.array(verts)
    colors = np.full_like(verts, 0.5)
    return TriMesh(verts, np.array(normals), np.array(tris), colors)


def _cylinder_unit(level: int) -> TriMesh:
    """Unit cylinder: axis local y in [-1,1], radius 1, 4*level radial segments."""
    n = 4 * level
    phi = 2 * np.pi * np.arange(n) / n
    cs, sn = np.cos(phi), np.sin(phi)

    verts, normals, tris = [], [], []
    # side: two shared rings with radial normals
    for y in (1.0, -1.0):
        for k in range(n):
            verts.append([cs[k], y, sn[k]])
            normals.append([cs[k], 0.0, sn[k]])
    for k in range(n):
        k2 = (k + 1) % n
        top, bot = k, n + k
        top2, bot2 = k2, n + k2
        tris.append([top, top2, bot2])
        tris.append([top, bot2, bot])
    # caps: duplicated rim vertices + center, axis normals
    for y, nx in ((1.0, 1.0), (-1.0, -1.0)):
        base = len(verts)
        for k in range(n):
            verts.append([cs[k], y, sn[k]])
            normals.append([0.0, nx, 0.0])
        verts.append([0.0, y, 0.0])
        normals.append([0.0, nx, 0.0])
        center = base + n
        for k in range(n):
            k2 = (k + 1) % n
            if y > 0:
                tris.append([center, base + k2, base + k])
            else:
                tris.append([center, base + k, base + k2])

    verts = np.array(verts, dtype=np.float64)
    colors = np.full_like(verts, 0.5)
    return TriMesh(verts, np.array(normals, dtype=np.float64), np.array(tris), colors)


def tessellate_primitive(prim: Primitive, level: int) -> TriMesh:
    """Tessellate a primitive into a world-space triangle mesh (pose and scale applied)."""
    if level < 1:
        raise ValueError(f"tessellation level must be >= 1, got {level}")
    if prim.kind is PrimitiveKind.SPHERE:
        unit = _sphere_unit(level)
    elif prim.kind is PrimitiveKind.BOX:
        unit = _box_unit(level)
    elif prim.kind is PrimitiveKind.CYLINDER:
        unit = _cylinder_unit(level)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown primitive kind {prim.kind}")
    return _pose_scale_apply(unit, prim)
