"""Runtime configuration: JSON file with per-field environment overrides.

Precedence is defaults < JSON file < ``PRIMSCENE_<FIELD>`` environment
variables, so containers can tweak single knobs without editing files.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_PREFIX = "PRIMSCENE_"


@dataclass
class Config:
    # Backend endpoints: all "mock" for in-process stubs, or four base URLs.
    stylizer_url: str = "mock"
    meshgen_url: str = "mock"
    grid_editor_url: str = "mock"
    renderer_url: str = "mock"

    # Reference-grid layout and tile size.
    grid_rows: int = 3
    grid_cols: int = 3
    blank_index: int = 4
    tile_w: int = 256
    tile_h: int = 256

    # Reference camera ring around the placed object.
    ring_radius_multiplier: float = 2.5
    ring_elevation_deg: float = 20.0

    # Rasterizer clip planes (scene units).
    render_near: float = 0.05
    render_far: float = 100.0

    # Primitive preview tessellation.
    tessellation_level: int = 16

    # Wire policy.
    backend_concurrency: int = 2
    retry_attempts: int = 3
    retry_backoff_base: float = 1.0
    request_timeout: float = 300.0

    def validate(self) -> None:
        slots = self.grid_rows * self.grid_cols
        if slots < 2:
            raise ValueError(f"grid needs at least 2 slots, got {self.grid_rows}x{self.grid_cols}")
        if not (0 <= self.blank_index < slots):
            raise ValueError(f"blank_index {self.blank_index} outside 0..{slots - 1}")
        for f in dataclasses.fields(self):
            if f.name == "blank_index":  # zero-based slot, checked above
                continue
            v = getattr(self, f.name)
            if f.type in ("int", "float") and v <= 0:
                raise ValueError(f"config field {f.name} must be positive, got {v}")
        if self.render_near >= self.render_far:
            raise ValueError(
                f"render_near ({self.render_near}) must be below render_far ({self.render_far})"
            )

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "Config":
        """Defaults, then the JSON file (if given), then environment overrides."""
        values: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text())
            if not isinstance(raw, dict):
                raise ValueError(f"config file {path} must hold a JSON object")
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = set(raw) - names
            if unknown:
                raise ValueError(f"unknown config fields: {sorted(unknown)}")
            values.update(raw)

        env = os.environ if env is None else env
        for f in dataclasses.fields(cls):
            key = ENV_PREFIX + f.name.upper()
            if key not in env:
                continue
            text = env[key]
            try:
                if f.type == "int":
                    values[f.name] = int(text)
                elif f.type == "float":
                    values[f.name] = float(text)
                else:
                    values[f.name] = text
            except ValueError as e:
                raise ValueError(f"bad value for {key}: {text!r}") from e

        cfg = cls(**values)
        cfg.validate()
        return cfg
