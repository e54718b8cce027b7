"""Synthetic capture datasets for tests and offline demos.

Cameras sit on a ring around the origin looking inward, with a gentle height
wobble so poses are not coplanar. Every image is a closed-form gradient that
encodes its frame index, which makes nearest-frame lookups visually obvious
and keeps repeated generation byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import FrameRecord, NerfDataset, save_dataset
from .geometry import CameraIntrinsics, look_at_pose
from .images import save_color_png


def frame_image(index: int, count: int, width: int, height: int) -> np.ndarray:
    """Deterministic uint8 test pattern; unique per frame index."""
    x = np.linspace(0.0, 1.0, width, dtype=np.float32)
    y = np.linspace(0.0, 1.0, height, dtype=np.float32)
    r = np.tile(x, (height, 1))
    g = np.tile(y[:, None], (1, width))
    b = np.full((height, width), (index + 1) / (count + 1), dtype=np.float32)
    img = np.stack([r, g, b], axis=2)
    return (img * 255.0 + 0.5).astype(np.uint8)


def make_ring_dataset(
    out_dir: str | Path,
    n_frames: int = 24,
    width: int = 64,
    height: int = 48,
    radius: float = 4.0,
    fov_x_deg: float = 60.0,
) -> NerfDataset:
    """Write a complete dataset (images + manifest) and return it loaded."""
    if n_frames < 1:
        raise ValueError(f"need at least one frame, got {n_frames}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fx = width / (2.0 * np.tan(np.deg2rad(fov_x_deg) / 2.0))
    intr = CameraIntrinsics(
        fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0, width=width, height=height
    )

    target = np.zeros(3)
    up = np.array([0.0, 1.0, 0.0])
    records = []
    for k in range(n_frames):
        az = 2.0 * np.pi * k / n_frames
        eye = np.array(
            [
                radius * np.cos(az),
                1.0 + 0.5 * np.sin(2.0 * az),
                radius * np.sin(az),
            ]
        )
        pose = look_at_pose(eye, target, up)
        name = f"frame_{k:04d}.png"
        save_color_png(out / name, frame_image(k, n_frames, width, height))
        records.append(FrameRecord(name, pose))

    ds = NerfDataset(intr, tuple(records), out)
    save_dataset(ds, out)
    return ds
