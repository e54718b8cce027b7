"""Object-insertion pipeline.

Each placed primitive is stylized from a single view, turned into a textured
mesh, and integrated into the capture dataset either by adding new frames
(reference-ring views of the edited object) or by editing the existing frames
that can see it. A per-scene ledger keeps every inserted mesh so that later
insertions render, occlude against, and mask all earlier objects — nothing
about a prior object is forgotten between runs.

Stage order per object:

1. stylize   — composite the primitive over a scene render from the nearest
               dataset camera, send to the stylizer with the user prompt;
2. mesh      — image-to-mesh on the stylized view;
3. grids     — place the mesh inside the primitive's box, ring reference
               cameras around it, render condition tiles (color/depth/mask)
               of *all* scene meshes, assemble the reference grid, and have
               the grid editor fill the blank slot;
4. dataset   — apply the chosen strategy to the dataset on disk.

All stages are deterministic given deterministic backends, so a repeated run
yields a byte-identical dataset.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import (
    GridEditRequest,
    MeshGenRequest,
    RenderSceneRequest,
    StylizeRequest,
    ValidatedBackends,
)
from .backends.meshio import decode_obj, encode_obj
from .config import Config
from .dataset import NerfDataset, add_frames, replace_frame_image, save_dataset
from .errors import DegenerateDirectionError, DegeneratePrimitiveError, PipelineError
from .geometry import (
    CameraView,
    Pose,
    Primitive,
    PrimitiveKind,
    TriMesh,
    look_at_pose,
    pose_distance,
    tessellate_primitive,
)
from .images import resize_bicubic, resize_bilinear, save_color_png, to_float
from .raster import RenderOutput, composite_over, render_meshes
from .refgrid import assemble_grid, save_grid, select_reference_cameras, split_grid

log = logging.getLogger(__name__)

REPORT_HEADER = [
    "Object",
    "Primitive-Stylization (s)",
    "Mesh Generation (s)",
    "SIGNeRF (min)",
    "Total (min)",
]

STAGES = ("stylize", "mesh", "grids", "dataset")


class Strategy(enum.Enum):
    ADD_NEW_IMAGES = "AddNewImages"
    MODIFY_EXISTING = "ModifyExisting"


@dataclass
class ObjectSpec:
    """One queued insertion: what to place, where, and how it should look."""

    name: str
    primitive: Primitive
    prompt: str
    strategy: Strategy = Strategy.ADD_NEW_IMAGES

    def __post_init__(self):
        if isinstance(self.strategy, str):
            self.strategy = Strategy(self.strategy)

    def validate(self) -> None:
        bare = self.name.replace("-", "").replace("_", "")
        if not self.name or not self.name.isascii() or not bare.isalnum():
            raise ValueError(f"object name must be a nonempty slug, got {self.name!r}")
        if not self.prompt or not self.prompt.strip():
            raise ValueError(f"object {self.name!r} has an empty prompt")
        try:
            self.primitive.pose.validate()
        except ValueError as e:
            raise ValueError(f"object {self.name!r}: {e}") from e
        if not np.all(np.isfinite(self.primitive.scale)):
            raise ValueError(f"object {self.name!r} has non-finite scale")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "prompt": self.prompt,
            "strategy": self.strategy.value,
            "primitive": {
                "kind": self.primitive.kind.value,
                "transform": self.primitive.pose.matrix().tolist(),
                "scale": self.primitive.scale.tolist(),
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ObjectSpec":
        try:
            prim = doc["primitive"]
            spec = cls(
                name=str(doc["name"]),
                prompt=str(doc["prompt"]),
                strategy=Strategy(doc.get("strategy", Strategy.ADD_NEW_IMAGES.value)),
                primitive=Primitive(
                    kind=PrimitiveKind(prim["kind"]),
                    pose=Pose.from_matrix(np.asarray(prim["transform"], dtype=np.float64)),
                    scale=np.asarray(prim["scale"], dtype=np.float64),
                ),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"bad object spec: {e}") from e
        spec.validate()
        return spec


@dataclass
class InsertedObject:
    spec: ObjectSpec
    mesh: TriMesh  # world coordinates, as placed
    centroid: np.ndarray
    bound_radius: float


@dataclass(frozen=True)
class SceneState:
    """Ledger of everything inserted so far; append-only across a scene's life."""

    inserted: tuple[InsertedObject, ...] = ()
    base_dataset_size: int = 0

    def meshes(self) -> list[TriMesh]:
        return [o.mesh for o in self.inserted]

    def names(self) -> list[str]:
        return [o.spec.name for o in self.inserted]

    def with_object(self, obj: InsertedObject) -> "SceneState":
        return SceneState(self.inserted + (obj,), self.base_dataset_size)


@dataclass
class ReportRow:
    name: str
    stylize_seconds: float
    meshgen_seconds: float
    integrate_minutes: float
    total_minutes: float


@dataclass
class PipelineReport:
    rows: list[ReportRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow(
                [
                    r.name,
                    f"{r.stylize_seconds:.3f}",
                    f"{r.meshgen_seconds:.3f}",
                    f"{r.integrate_minutes:.3f}",
                    f"{r.total_minutes:.3f}",
                ]
            )
        return buf.getvalue()


def place_mesh(mesh_local: TriMesh, prim: Primitive) -> TriMesh:
    """Fit a unit-box mesh into the primitive's world bounding box.

    The mesh is rotated by the primitive's pose, then uniformly scaled by the
    largest factor whose bounding box still fits inside the primitive's
    world-space bounding box, then centered in that box. No shear, no
    per-axis stretch.
    """
    scale = np.asarray(prim.scale, dtype=np.float64)
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
        raise DegeneratePrimitiveError(
            f"primitive has zero-volume bounding box (scale {scale.tolist()})"
        )
    lo, hi = mesh_local.bounds()
    if lo.min() < -0.5 - 1e-6 or hi.max() > 0.5 + 1e-6:
        raise ValueError(f"mesh to place must fit in the unit box, bounds {lo} .. {hi}")

    # World AABB of the primitive: transform its 8 local corners.
    corners = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
    ) * scale
    world = prim.pose.apply(corners)
    box_lo, box_hi = world.min(axis=0), world.max(axis=0)

    rotated = mesh_local.transformed(Pose(prim.pose.rotation, np.zeros(3)))
    m_lo, m_hi = rotated.bounds()
    extent = m_hi - m_lo
    box_extent = box_hi - box_lo
    with np.errstate(divide="ignore"):
        ratios = np.where(extent > 0, box_extent / np.maximum(extent, 1e-300), np.inf)
    s = float(ratios.min())
    if not np.isfinite(s):
        raise ValueError("mesh to place has zero extent on every axis")

    shift = (box_lo + box_hi) / 2.0 - s * (m_lo + m_hi) / 2.0
    return TriMesh(
        rotated.vertices * s + shift,
        rotated.normals,
        rotated.triangles,
        rotated.vertex_colors,
    )


def _frustum_planes(view: CameraView, near: float, far: float) -> np.ndarray:
    """Six world-space planes (nx, ny, nz, d), unit normals pointing inward."""
    k = view.intrinsics
    w, h = float(k.width), float(k.height)
    # Camera-space planes as (n, d) with inside meaning n.p + d >= 0.
    # Image bounds run to the outer pixel edges (centers sit on integers).
    # u = cx + fx x / (-z) with z < 0, so u >= -0.5 becomes
    # fx x + (cx + 0.5)(-z) >= 0: the (-z) factor negates each z coefficient.
    cam = [
        (np.array([0.0, 0.0, -1.0]), -near),
        (np.array([0.0, 0.0, 1.0]), far),
        (np.array([k.fx, 0.0, -(k.cx + 0.5)]), 0.0),        # u >= -0.5
        (np.array([-k.fx, 0.0, -(w - 0.5 - k.cx)]), 0.0),   # u <= w - 0.5
        (np.array([0.0, -k.fy, -(k.cy + 0.5)]), 0.0),       # v >= -0.5
        (np.array([0.0, k.fy, -(h - 0.5 - k.cy)]), 0.0),    # v <= h - 0.5
    ]
    planes = np.zeros((6, 4))
    r, t = view.pose.rotation, view.pose.translation
    for i, (n, d) in enumerate(cam):
        n = n / np.linalg.norm(n)
        nw = r @ n
        planes[i, :3] = nw
        planes[i, 3] = d - float(nw @ t)
    return planes


def frustum_frames(
    ds: NerfDataset, centroid: np.ndarray, bound_radius: float, near: float, far: float
) -> list[int]:
    """Indices of frames whose view frustum can intersect the bounding sphere.

    Conservative plane test: a frame is kept unless the sphere is strictly
    outside one of its six frustum planes, so no visible frame is ever missed
    (corner regions may produce false positives).
    """
    if bound_radius <= 0:
        raise ValueError(f"bound_radius must be positive, got {bound_radius}")
    c = np.asarray(centroid, dtype=np.float64).reshape(3)
    out = []
    for i in range(len(ds)):
        planes = _frustum_planes(ds.view(i), near, far)
        dist = planes[:, :3] @ c + planes[:, 3]
        if np.all(dist >= -bound_radius):
            out.append(i)
    return out


def nearest_view_index(ds: NerfDataset, centroid: np.ndarray) -> int:
    """Frame whose camera best matches an ideal camera staring at the centroid.

    Each frame is scored by the pose distance between its actual pose and a
    look-at pose from the same position toward the centroid; positions are
    shared, so the score reduces to how far the camera is turned away from
    the object. Ties break toward the lower index.
    """
    c = np.asarray(centroid, dtype=np.float64).reshape(3)
    up_y = np.array([0.0, 1.0, 0.0])
    up_z = np.array([0.0, 0.0, 1.0])
    best, best_d = 0, np.inf
    for i in range(len(ds)):
        pose = ds.frames[i].transform
        try:
            ideal = look_at_pose(pose.translation, c, up_y)
        except DegenerateDirectionError:
            try:
                ideal = look_at_pose(pose.translation, c, up_z)
            except DegenerateDirectionError:
                continue  # camera sits on the centroid; useless view
        d = pose_distance(pose, ideal)
        if d < best_d:
            best, best_d = i, d
    return best


@dataclass
class JobState:
    """Resume record: which objects finished, which stage the current one is in."""

    total: int
    object_index: int = 0
    object_name: str = ""
    stage: str = "idle"
    artifacts: dict = field(default_factory=dict)
    completed: list = field(default_factory=list)  # ReportRow dicts, in order
    error: str | None = None

    def save(self, path: str | Path) -> None:
        p = Path(path)
        p.write_text(json.dumps(self.__dict__, indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "JobState":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)


def _timer() -> float:
    return time.perf_counter()


def insert_object(
    scene: SceneState,
    ds: NerfDataset,
    spec: ObjectSpec,
    backends: ValidatedBackends,
    config: Config,
    artifacts_dir: str | Path | None = None,
    progress=None,
) -> tuple[SceneState, NerfDataset, ReportRow]:
    """Run the four-stage pipeline for one object. See module docstring."""
    spec.validate()
    if len(ds) == 0:
        raise PipelineError("dataset has no frames to condition on")

    def report(stage: str) -> None:
        log.info("object %s: %s", spec.name, stage)
        if progress is not None:
            progress(spec.name, stage)

    art = Path(artifacts_dir) if artifacts_dir is not None else None
    if art is not None:
        art.mkdir(parents=True, exist_ok=True)

    t0 = _timer()

    # -- stage 1: single-view stylization ---------------------------------
    report("stylize")
    prim_centroid = spec.primitive.pose.translation
    base_idx = nearest_view_index(ds, prim_centroid)
    base_view = ds.view(base_idx)
    prim_mesh = tessellate_primitive(spec.primitive, config.tessellation_level)
    prim_render = render_meshes(base_view, [prim_mesh], config.render_near, config.render_far)
    background = to_float(backends.render_scene(RenderSceneRequest(base_view), ds))
    stylize_input = composite_over(background, prim_render)
    stylized = to_float(backends.stylize(StylizeRequest(stylize_input, spec.prompt)))
    t1 = _timer()
    if art is not None:
        save_color_png(art / "stylize_input.png", stylize_input)
        save_color_png(art / "stylized.png", stylized)

    # -- stage 2: image to mesh -------------------------------------------
    report("mesh")
    mesh_local = backends.generate_mesh(MeshGenRequest(stylized))
    t2 = _timer()
    if art is not None:
        (art / "mesh.obj").write_bytes(encode_obj(mesh_local))

    # -- stage 3: placement, reference ring, grid edit ---------------------
    report("grids")
    placed = place_mesh(mesh_local, spec.primitive)
    p_lo, p_hi = placed.bounds()
    centroid = (p_lo + p_hi) / 2.0
    bound_radius = float(np.linalg.norm(placed.vertices - centroid, axis=1).max())

    slots = config.grid_rows * config.grid_cols
    tile_intr = ds.intrinsics.scaled(config.tile_w, config.tile_h)
    ref_views = select_reference_cameras(
        centroid,
        bound_radius,
        slots - 1,
        tile_intr,
        config.ring_radius_multiplier,
        config.ring_elevation_deg,
    )
    all_meshes = scene.meshes() + [placed]

    tiles: list[RenderOutput] = []
    for v in ref_views:
        cond = render_meshes(v, all_meshes, config.render_near, config.render_far)
        full_view = CameraView(ds.intrinsics, v.pose)
        bg = to_float(backends.render_scene(RenderSceneRequest(full_view), ds))
        bg_tile = to_float(resize_bilinear(bg, config.tile_w, config.tile_h))
        tiles.append(RenderOutput(composite_over(bg_tile, cond), cond.depth, cond.mask))

    grid = assemble_grid(tiles, ref_views, config.blank_index, config.grid_rows, config.grid_cols)
    if backends.prefills_blank_slot:
        # Identity editors leave the blank slot as-is, so put the expected
        # composite there ourselves: all meshes over the stylize view.
        blank_view = CameraView(tile_intr, base_view.pose)
        blank_cond = render_meshes(blank_view, all_meshes, config.render_near, config.render_far)
        blank_bg = to_float(resize_bilinear(background, config.tile_w, config.tile_h))
        y0, y1, x0, x1 = grid.slot_box(config.blank_index)
        grid.color_grid[y0:y1, x0:x1] = composite_over(blank_bg, blank_cond)

    if art is not None:
        save_grid(grid, art, "grid")

    edited = to_float(
        backends.edit_grid(
            GridEditRequest(
                color_grid=grid.color_grid,
                depth_grid=grid.depth_grid,
                mask_grid=grid.mask_grid,
                prompt=spec.prompt,
                rows=config.grid_rows,
                cols=config.grid_cols,
                tile_w=config.tile_w,
                tile_h=config.tile_h,
                blank_index=config.blank_index,
            )
        )
    )
    if art is not None:
        save_color_png(art / "grid_edited.png", edited)
    all_tiles = split_grid(edited, config.grid_rows, config.grid_cols, config.tile_w, config.tile_h)
    edited_tiles = [t for i, t in enumerate(all_tiles) if i != config.blank_index]

    # -- stage 4: dataset update -------------------------------------------
    report("dataset")
    if spec.strategy is Strategy.ADD_NEW_IMAGES:
        w, h = ds.intrinsics.width, ds.intrinsics.height
        new = [
            (CameraView(ds.intrinsics, v.pose), to_float(resize_bicubic(t, w, h)))
            for v, t in zip(ref_views, edited_tiles)
        ]
        ds2 = add_frames(ds, new)
        save_dataset(ds2, ds2.root_dir)
    else:
        visible = frustum_frames(ds, centroid, bound_radius, config.render_near, config.render_far)
        ds2 = ds
        modified = 0
        for i in visible:
            overlay = render_meshes(ds.view(i), all_meshes, config.render_near, config.render_far)
            if not overlay.mask.any():
                continue
            img = composite_over(to_float(ds.load_image(i)), overlay)
            ds2 = replace_frame_image(ds2, i, img)
            modified += 1
        if modified == 0:
            log.warning(
                "object %s is outside every camera frustum; no frames modified", spec.name
            )

    scene2 = scene.with_object(InsertedObject(spec, placed, centroid, bound_radius))
    t3 = _timer()
    row = ReportRow(
        name=spec.name,
        stylize_seconds=t1 - t0,
        meshgen_seconds=t2 - t1,
        integrate_minutes=(t3 - t2) / 60.0,
        total_minutes=(t3 - t0) / 60.0,
    )
    return scene2, ds2, row


def insert_objects(
    scene: SceneState,
    ds: NerfDataset,
    specs: list[ObjectSpec],
    backends: ValidatedBackends,
    config: Config,
    workdir: str | Path,
    progress=None,
    resume: bool = False,
) -> tuple[SceneState, NerfDataset, PipelineReport]:
    """Insert objects left to right, persisting progress after each one.

    Aborts on the first failure; completed objects stay on disk (dataset,
    scene ledger, job state), so a rerun with resume=True skips them.
    """
    if not specs:
        raise ValueError("no objects queued")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"object names must be unique, got {names}")
    for s in specs:
        s.validate()

    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    state_path = work / "jobstate.json"

    job = JobState(total=len(specs))
    start = 0
    if resume and state_path.exists():
        job = JobState.load(state_path)
        if job.total != len(specs):
            raise PipelineError(
                f"job state covers {job.total} objects, queue has {len(specs)}; cannot resume"
            )
        start = len(job.completed)
        saved_scene = work / "scene"
        if start and (saved_scene / "state.json").exists():
            scene = load_state(saved_scene)
        log.info("resuming at object %d/%d", start + 1, len(specs))

    rows = [ReportRow(**r) for r in job.completed]
    for k in range(start, len(specs)):
        spec = specs[k]
        job.object_index = k
        job.object_name = spec.name
        job.stage = "stylize"
        job.error = None
        job.artifacts[spec.name] = str(work / spec.name)
        job.save(state_path)

        def stage_progress(name: str, stage: str, _k=k) -> None:
            job.stage = stage
            job.save(state_path)
            if progress is not None:
                progress(name, stage, _k)

        try:
            scene, ds, row = insert_object(
                scene, ds, spec, backends, config,
                artifacts_dir=work / spec.name,
                progress=stage_progress,
            )
        except Exception as e:
            job.error = f"{type(e).__name__}: {e}"
            job.stage = "failed"
            job.save(state_path)
            raise
        rows.append(row)
        job.completed.append(row.__dict__.copy())
        job.stage = "done" if k == len(specs) - 1 else "idle"
        job.save(state_path)
        save_state(scene, work / "scene")

    return scene, ds, PipelineReport(rows)


# -- scene ledger persistence ---------------------------------------------


def save_state(state: SceneState, out_dir: str | Path) -> None:
    """Write the ledger: one JSON index plus one OBJ per inserted mesh."""
    out = Path(out_dir)
    (out / "meshes").mkdir(parents=True, exist_ok=True)
    objects = []
    for k, obj in enumerate(state.inserted):
        rel = f"meshes/{k:02d}_{obj.spec.name}.obj"
        (out / rel).write_bytes(encode_obj(obj.mesh))
        objects.append(
            {
                "spec": obj.spec.to_json(),
                "centroid": obj.centroid.tolist(),
                "bound_radius": obj.bound_radius,
                "mesh": rel,
            }
        )
    doc = {"base_dataset_size": state.base_dataset_size, "objects": objects}
    (out / "state.json").write_text(json.dumps(doc, indent=2))


def load_state(in_dir: str | Path) -> SceneState:
    src = Path(in_dir)
    doc = json.loads((src / "state.json").read_text())
    inserted = []
    for entry in doc["objects"]:
        inserted.append(
            InsertedObject(
                spec=ObjectSpec.from_json(entry["spec"]),
                mesh=decode_obj((src / entry["mesh"]).read_bytes()),
                centroid=np.asarray(entry["centroid"], dtype=np.float64),
                bound_radius=float(entry["bound_radius"]),
            )
        )
    return SceneState(tuple(inserted), int(doc["base_dataset_size"]))
