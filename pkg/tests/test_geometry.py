import numpy as np
import numpy.testing as npt
import pytest

from primscene.errors import DegenerateDirectionError
from primscene.geometry import (
    CameraIntrinsics,
    CameraView,
    Pose,
    Primitive,
    PrimitiveKind,
    TriMesh,
    compose,
    geodesic_angle,
    invert,
    look_at_pose,
    pose_distance,
    project_point,
    tessellate_primitive,
    unproject_point,
)

INTR = CameraIntrinsics(fx=100.0, fy=120.0, cx=32.0, cy=24.0, width=64, height=48)


def random_rotation(rng) -> np.ndarray:
    # QR of a Gaussian matrix, sign-fixed to det +1: uniform enough for tests.
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    """Independent rotation construction for oracle checks."""
    a = axis / np.linalg.norm(axis)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


# -- pose algebra -----------------------------------------------------------


def test_pose_apply_matches_homogeneous_matrix(rng):
    for _ in range(20):
        p = Pose(random_rotation(rng), rng.normal(size=3))
        pts = rng.normal(size=(7, 3))
        hom = np.concatenate([pts, np.ones((7, 1))], axis=1)
        expect = (p.matrix() @ hom.T).T[:, :3]
        npt.assert_allclose(p.apply(pts), expect, atol=1e-12)


def test_pose_apply_single_vector():
    p = Pose(np.eye(3), [1.0, 2.0, 3.0])
    npt.assert_allclose(p.apply(np.zeros(3)), [1.0, 2.0, 3.0])


def test_compose_is_application_order(rng):
    a = Pose(random_rotation(rng), rng.normal(size=3))
    b = Pose(random_rotation(rng), rng.normal(size=3))
    x = rng.normal(size=3)
    npt.assert_allclose(compose(a, b).apply(x), a.apply(b.apply(x)), atol=1e-12)


def test_invert_round_trip(rng):
    p = Pose(random_rotation(rng), rng.normal(size=3))
    ident = compose(p, invert(p))
    npt.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
    npt.assert_allclose(ident.translation, 0.0, atol=1e-12)


def test_pose_validate_rejects_non_orthonormal():
    with pytest.raises(ValueError, match="orthonormal"):
        Pose(np.eye(3) * 1.01, np.zeros(3)).validate()


def test_pose_validate_rejects_reflection():
    r = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError, match="determinant"):
        Pose(r, np.zeros(3)).validate()


def test_geodesic_angle_matches_rodrigues_construction(rng):
    for _ in range(10):
        axis = rng.normal(size=3)
        angle = rng.uniform(0.01, np.pi - 0.01)
        r = rodrigues(axis, angle)
        assert geodesic_angle(np.eye(3), r) == pytest.approx(angle, abs=1e-9)


def test_pose_distance_combines_translation_and_angle():
    a = Pose(np.eye(3), np.zeros(3))
    b = Pose(rodrigues(np.array([0.0, 1.0, 0.0]), 0.5), np.array([3.0, 4.0, 0.0]))
    assert pose_distance(a, b) == pytest.approx(5.0 + 0.5, abs=1e-9)
    assert pose_distance(a, b, rotation_weight=2.0) == pytest.approx(5.0 + 1.0, abs=1e-9)


# -- projection -------------------------------------------------------------


def test_project_point_hand_computed_axis_aligned_case():
    # Camera at (0,0,5) with identity rotation looks along world -z.
    view = CameraView(INTR, Pose(np.eye(3), [0.0, 0.0, 5.0]))
    uv = project_point(view, np.array([1.0, 2.0, 0.0]))
    # Camera-space point is (1, 2, -5): u = cx + fx*(1/5), v = cy - fy*(2/5).
    assert uv == pytest.approx((32.0 + 100.0 / 5.0, 24.0 - 120.0 * 2.0 / 5.0), abs=1e-12)


def test_project_point_behind_camera_is_none():
    view = CameraView(INTR, Pose(np.eye(3), [0.0, 0.0, 5.0]))
    assert project_point(view, np.array([0.0, 0.0, 6.0])) is None
    assert project_point(view, np.array([0.0, 0.0, 5.0])) is None  # on the pinhole


def test_plus_y_in_camera_space_moves_up_in_image():
    view = CameraView(INTR, Pose(np.eye(3), [0.0, 0.0, 5.0]))
    _, v_low = project_point(view, np.array([0.0, 0.0, 0.0]))
    _, v_high = project_point(view, np.array([0.0, 1.0, 0.0]))
    assert v_high < v_low  # larger world y -> smaller row index


def test_project_unproject_round_trip_random_views(rng):
    for _ in range(50):
        view = CameraView(INTR, Pose(random_rotation(rng), rng.normal(size=3) * 3))
        p = rng.normal(size=3) * 2
        cam = invert(view.pose).apply(p)
        if cam[2] > -0.1:  # keep clearly in front
            continue
        uv = project_point(view, p)
        back = unproject_point(view, uv[0], uv[1], -cam[2])
        npt.assert_allclose(back, p, atol=1e-9)


def test_intrinsics_scaled_preserves_projection_proportionally():
    view = CameraView(INTR, Pose(np.eye(3), [0.0, 0.0, 5.0]))
    half = view.scaled(32, 24)
    p = np.array([0.7, -0.4, 1.0])
    u, v = project_point(view, p)
    u2, v2 = project_point(half, p)
    assert u2 == pytest.approx(u * 0.5, abs=1e-9)
    assert v2 == pytest.approx(v * 0.5, abs=1e-9)


def test_look_at_points_camera_at_target(rng):
    for _ in range(20):
        eye = rng.normal(size=3) * 4
        target = rng.normal(size=3)
        if np.linalg.norm(target - eye) < 1e-3:
            continue
        pose = look_at_pose(eye, target, np.array([0.0, 1.0, 0.0]))
        pose.validate()
        fwd = pose.rotation @ np.array([0.0, 0.0, -1.0])
        expect = (target - eye) / np.linalg.norm(target - eye)
        npt.assert_allclose(fwd, expect, atol=1e-12)
        npt.assert_allclose(pose.translation, eye, atol=1e-12)


def test_look_at_projects_target_to_principal_point():
    eye = np.array([2.0, 1.5, -3.0])
    target = np.array([0.2, -0.1, 0.4])
    pose = look_at_pose(eye, target, np.array([0.0, 1.0, 0.0]))
    u, v = project_point(CameraView(INTR, pose), target)
    assert (u, v) == pytest.approx((INTR.cx, INTR.cy), abs=1e-9)


def test_look_at_degenerate_inputs():
    with pytest.raises(DegenerateDirectionError):
        look_at_pose(np.zeros(3), np.zeros(3), np.array([0.0, 1.0, 0.0]))
    with pytest.raises(DegenerateDirectionError):
        look_at_pose(np.zeros(3), np.array([0.0, 1.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    with pytest.raises(DegenerateDirectionError):
        look_at_pose(np.zeros(3), np.array([1.0, 0.0, 0.0]), np.zeros(3))


# -- meshes -----------------------------------------------------------------


def closed_surface_signed_volume(mesh: TriMesh) -> float:
    v = mesh.vertices
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def test_trimesh_validate_catches_defects():
    good = tessellate_primitive(Primitive(PrimitiveKind.BOX, Pose.identity(), np.ones(3)), 1)
    good.validate()

    bad = TriMesh(good.vertices, good.normals * 1.5, good.triangles, good.vertex_colors)
    with pytest.raises(ValueError, match="unit length"):
        bad.validate()

    bad = TriMesh(good.vertices, good.normals, good.triangles, good.vertex_colors + 2.0)
    with pytest.raises(ValueError, match="colors"):
        bad.validate()

    tris = good.triangles.copy()
    tris[0, 0] = len(good.vertices)
    with pytest.raises(ValueError, match="out of range"):
        TriMesh(good.vertices, good.normals, tris, good.vertex_colors).validate()

    verts = good.vertices.copy()
    verts[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        TriMesh(verts, good.normals, good.triangles, good.vertex_colors).validate()


@pytest.mark.parametrize("kind", list(PrimitiveKind))
def test_tessellation_is_valid_and_bounded(kind):
    scale = np.array([0.7, 1.3, 0.9])
    mesh = tessellate_primitive(Primitive(kind, Pose.identity(), scale), 8)
    mesh.validate()
    lo, hi = mesh.bounds()
    npt.assert_array_less(np.abs(lo) - 1e-9, scale)
    npt.assert_array_less(np.abs(hi) - 1e-9, scale)
    if kind is PrimitiveKind.BOX:
        npt.assert_allclose(lo, -scale, atol=1e-12)
        npt.assert_allclose(hi, scale, atol=1e-12)


@pytest.mark.parametrize(
    "kind,expected",
    [
        (PrimitiveKind.SPHERE, 4.0 / 3.0 * np.pi),
        (PrimitiveKind.BOX, 8.0),
        (PrimitiveKind.CYLINDER, 2.0 * np.pi),
    ],
)
def test_tessellation_volume_oracle(kind, expected):
    # Signed volume via the divergence theorem checks outward winding and
    # watertightness in one number; unit half-extents everywhere.
    mesh = tessellate_primitive(Primitive(kind, Pose.identity(), np.ones(3)), 32)
    vol = closed_surface_signed_volume(mesh)
    rel = abs(vol - expected) / expected
    assert rel < 5e-3, f"{kind}: volume {vol:.6f} vs analytic {expected:.6f}"


def test_sphere_tessellation_is_watertight_manifold():
    mesh = tessellate_primitive(Primitive(PrimitiveKind.SPHERE, Pose.identity(), np.ones(3)), 4)
    edges = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    assert set(edges.values()) == {2}
    v, f = len(mesh.vertices), len(mesh.triangles)
    assert v - len(edges) + f == 2  # Euler characteristic of a sphere


def test_sphere_normals_are_radial():
    mesh = tessellate_primitive(Primitive(PrimitiveKind.SPHERE, Pose.identity(), np.ones(3)), 6)
    npt.assert_allclose(mesh.normals, mesh.vertices, atol=1e-12)


def test_tessellation_applies_pose(rng):
    r = random_rotation(rng)
    t = np.array([1.0, -2.0, 0.5])
    prim = Primitive(PrimitiveKind.BOX, Pose(r, t), np.array([0.5, 0.5, 0.5]))
    moved = tessellate_primitive(prim, 2)
    base = tessellate_primitive(Primitive(PrimitiveKind.BOX, Pose.identity(), 0.5 * np.ones(3)), 2)
    npt.assert_allclose(moved.vertices, base.vertices @ r.T + t, atol=1e-12)


def test_transformed_normals_use_inverse_transpose():
    # Stretch a sphere into an ellipsoid: true normal at p=(a nx, b ny, c nz)
    # is parallel to (nx/a, ny/b, nz/c), not to the stretched normal.
    sphere = tessellate_primitive(Primitive(PrimitiveKind.SPHERE, Pose.identity(), np.ones(3)), 8)
    s = np.array([2.0, 1.0, 0.5])
    stretched = sphere.transformed(Pose.identity(), s)
    expect = sphere.normals / s
    expect /= np.linalg.norm(expect, axis=1, keepdims=True)
    npt.assert_allclose(stretched.normals, expect, atol=1e-12)


def test_tessellation_level_must_be_positive():
    with pytest.raises(ValueError, match="level"):
        tessellate_primitive(Primitive(PrimitiveKind.BOX, Pose.identity(), np.ones(3)), 0)


def test_primitive_kind_accepts_strings():
    p = Primitive("sphere", Pose.identity(), np.ones(3))
    assert p.kind is PrimitiveKind.SPHERE
