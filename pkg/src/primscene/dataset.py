"""Load, validate, and mutate Nerfstudio-format NeRF datasets.

A dataset is a directory holding a transforms.json (shared intrinsics:
fl_x/fl_y/cx/cy/w/h, plus per-frame file_path and 4x4 camera-to-world
transform_matrix) and the referenced PNG images.

In-memory dataset values are immutable; mutations return new values. The
image files on disk are the mutable substrate: add_frames writes new files
and replace_frame_image overwrites one file in place. Callers that need
isolation between runs copy the directory first (the service layer does).
"""

from __future__ import annotations

import json
import logging
import os
import re
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetIOError,
    DatasetParseError,
    DimensionMismatchError,
    MissingImagesError,
    NonOrthonormalRotationError,
)
from .geometry import CameraIntrinsics, CameraView, Pose
from .images import load_color_png, save_color_png

logger = logging.getLogger(__name__)

TRANSFORMS_NAME = "transforms.json"

# Rotation drift beyond this is an error; below it we snap to the nearest
# rotation (phone captures carry float noise).
ROTATION_DRIFT_TOL = 1e-3

_INTRINSIC_KEYS = ("fl_x", "fl_y", "cx", "cy", "w", "h")
_NEW_FRAME_RE = re.compile(r"^obj(\d+)_view(\d+)\.png$")


@dataclass(frozen=True)
class FrameRecord:
    file_path: str
    transform: Pose


@dataclass(frozen=True)
class NerfDataset:
    intrinsics: CameraIntrinsics
    frames: tuple[FrameRecord, ...]
    root_dir: Path

    def __len__(self) -> int:
        return len(self.frames)

    def view(self, index: int) -> CameraView:
        return CameraView(self.intrinsics, self.frames[index].transform)

    def image_path(self, index: int) -> Path:
        return self.root_dir / self.frames[index].file_path

    def load_image(self, index: int) -> np.ndarray:
        """Frame pixels as uint8 (H, W, 3)."""
        return load_color_png(self.image_path(index))


def _nearest_rotation(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def _parse_pose(mat, frame_idx: int) -> Pose:
    m = np.asarray(mat, dtype=np.float64)
    if m.shape != (4, 4):
        raise DatasetParseError(
            f"frames[{frame_idx}].transform_matrix must be 4x4, got shape {m.shape}"
        )
    r = m[:3, :3]
    det = float(np.linalg.det(r))
    if det < 0:
        raise NonOrthonormalRotationError(
            f"frames[{frame_idx}] rotation has determinant {det:.6f} "
            "(reflection is never a valid camera rotation)"
        )
    drift = float(np.abs(r.T @ r - np.eye(3)).max())
    if drift > ROTATION_DRIFT_TOL:
        raise NonOrthonormalRotationError(
            f"frames[{frame_idx}] rotation drift {drift:.3e} exceeds {ROTATION_DRIFT_TOL}"
        )
    if drift > 1e-12:
        logger.warning(
            "frames[%d] rotation drift %.3e; re-orthonormalized", frame_idx, drift
        )
        r = _nearest_rotation(r)
    return Pose(r, m[:3, 3])


def load_dataset(path: str | Path) -> NerfDataset:
    """Parse and validate a dataset directory."""
    root = Path(path)
    tf = root / TRANSFORMS_NAME
    if not tf.is_file():
        raise DatasetParseError(f"no {TRANSFORMS_NAME} under {root}")
    try:
        doc = json.loads(tf.read_text())
    except json.JSONDecodeError as e:
        raise DatasetParseError(f"{tf}: invalid JSON: {e}") from e

    for key in _INTRINSIC_KEYS:
        if key not in doc:
            raise DatasetParseError(f"{tf}: missing required field '{key}'")
    try:
        intr = CameraIntrinsics(
            fx=float(doc["fl_x"]), fy=float(doc["fl_y"]),
            cx=float(doc["cx"]), cy=float(doc["cy"]),
            width=int(doc["w"]), height=int(doc["h"]),
        )
    except (TypeError, ValueError) as e:
        raise DatasetParseError(f"{tf}: bad intrinsics: {e}") from e

    for k in ("k1", "k2", "p1", "p2"):
        if doc.get(k):
            logger.warning("%s: nonzero distortion %s=%s ignored (no distortion model)", tf, k, doc[k])

    raw_frames = doc.get("frames", [])
    if not isinstance(raw_frames, list):
        raise DatasetParseError(f"{tf}: 'frames' must be a list")

    frames: list[FrameRecord] = []
    seen: set[str] = set()
    for i, fr in enumerate(raw_frames):
        if not isinstance(fr, dict):
            raise DatasetParseError(f"{tf}: frames[{i}] is not an object")
        for key in _INTRINSIC_KEYS:
            if key in fr:
                raise DatasetParseError(
                    f"{tf}: frames[{i}] carries per-frame intrinsics ('{key}'); "
                    "only shared intrinsics are supported"
                )
        fp = fr.get("file_path")
        if not fp or not isinstance(fp, str):
            raise DatasetParseError(f"{tf}: frames[{i}].file_path missing or empty")
        if fp in seen:
            raise DatasetParseError(f"{tf}: duplicate file_path '{fp}'")
        seen.add(fp)
        if "transform_matrix" not in fr:
            raise DatasetParseError(f"{tf}: frames[{i}].transform_matrix missing")
        frames.append(FrameRecord(fp, _parse_pose(fr["transform_matrix"], i)))

    missing = [f.file_path for f in frames if not (root / f.file_path).is_file()]
    if missing:
        raise MissingImagesError(missing)

    from PIL import Image

    for f in frames:
        with Image.open(root / f.file_path) as im:
            if im.size != (intr.width, intr.height):
                raise DimensionMismatchError(
                    f"{f.file_path}: image is {im.size[0]}x{im.size[1]}, "
                    f"dataset intrinsics say {intr.width}x{intr.height}"
                )

    return NerfDataset(intr, tuple(frames), root)


def save_dataset(ds: NerfDataset, path: str | Path) -> None:
    """Write transforms.json and image files so load_dataset round-trips."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        doc = {
            "fl_x": ds.intrinsics.fx,
            "fl_y": ds.intrinsics.fy,
            "cx": ds.intrinsics.cx,
            "cy": ds.intrinsics.cy,
            "w": ds.intrinsics.width,
            "h": ds.intrinsics.height,
            "camera_angle_x": 2.0 * float(np.arctan(ds.intrinsics.width / (2.0 * ds.intrinsics.fx))),
            "frames": [
                {"file_path": f.file_path, "transform_matrix": f.transform.matrix().tolist()}
                for f in ds.frames
            ],
        }
        for f in ds.frames:
            src = (ds.root_dir / f.file_path).resolve()
            dst = (root / f.file_path).resolve()
            if src == dst:
                continue
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dst)
        # Manifest last, via rename, so a crash never leaves a manifest
        # pointing at images that were not written yet.
        tmp = root / (TRANSFORMS_NAME + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2))
        os.replace(tmp, root / TRANSFORMS_NAME)
    except OSError as e:
        raise DatasetIOError(f"saving dataset to {root}: {e}") from e


def _next_object_index(frames: tuple[FrameRecord, ...]) -> int:
    n = 0
    for f in frames:
        m = _NEW_FRAME_RE.match(f.file_path)
        if m:
            n = max(n, int(m.group(1)))
    return n + 1


def add_frames(
    ds: NerfDataset, new: list[tuple[CameraView, np.ndarray]]
) -> NerfDataset:
    """Append frames for newly generated views; pre-existing frames untouched.

    New file paths follow obj{N}_view{K}.png with N one past the highest
    object index already present, so iterative insertion stays auditable.
    """
    if not new:
        return ds
    for view, img in new:
        if (view.intrinsics.width, view.intrinsics.height) != (
            ds.intrinsics.width, ds.intrinsics.height,
        ):
            raise DimensionMismatchError(
                f"new view is {view.intrinsics.width}x{view.intrinsics.height}, "
                f"dataset is {ds.intrinsics.width}x{ds.intrinsics.height}"
            )
        if img.shape[:2] != (ds.intrinsics.height, ds.intrinsics.width):
            raise DimensionMismatchError(
                f"new image is {img.shape[1]}x{img.shape[0]}, "
                f"dataset is {ds.intrinsics.width}x{ds.intrinsics.height}"
            )

    obj_n = _next_object_index(ds.frames)
    existing = {f.file_path for f in ds.frames}
    records = list(ds.frames)
    for k, (view, img) in enumerate(new):
        name = f"obj{obj_n}_view{k}.png"
        # The naming scheme makes collisions impossible; a hit means the
        # scheme itself broke.
        assert name not in existing, f"generated frame name collides: {name}"
        save_color_png(ds.root_dir / name, img)
        records.append(FrameRecord(name, view.pose))
    return NerfDataset(ds.intrinsics, tuple(records), ds.root_dir)


def replace_frame_image(ds: NerfDataset, frame_index: int, image: np.ndarray) -> NerfDataset:
    """Overwrite one frame's pixels; frame count, poses and paths unchanged."""
    if not (0 <= frame_index < len(ds.frames)):
        raise IndexError(
            f"frame index {frame_index} out of range for {len(ds.frames)} frames"
        )
    if image.shape[:2] != (ds.intrinsics.height, ds.intrinsics.width):
        raise DimensionMismatchError(
            f"replacement image is {image.shape[1]}x{image.shape[0]}, "
            f"dataset is {ds.intrinsics.width}x{ds.intrinsics.height}"
        )
    save_color_png(ds.image_path(frame_index), image)
    return NerfDataset(ds.intrinsics, ds.frames, ds.root_dir)
