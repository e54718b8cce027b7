"""HTTP service exposing scenes, object queues, pipeline runs, and previews.

One `SceneSession` per scene id owns that scene's dataset, queued objects,
insertion ledger, and a lock; every mutation is a check-and-set under the
lock, so at most one pipeline run is ever in flight per scene and queue
edits are rejected with 409 while a run is active. Pipeline work happens on
a single background worker thread per run; GET endpoints only read snapshot
values and never mutate anything.

On-disk layout per scene (inside the dataset directory):

    primscene_work/queue.json    queued object specs
    primscene_work/jobstate.json resume record for the active/last run
    primscene_work/scene/        insertion ledger (state.json + meshes)
    primscene_work/report.csv    timing report of the last completed run
"""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse, Response

from .backends import make_backends
from .config import Config
from .dataset import load_dataset
from .geometry import tessellate_primitive
from .images import encode_png_bytes
from .integration import (
    ObjectSpec,
    PipelineReport,
    SceneState,
    insert_objects,
    load_state,
)
from .raster import composite_over, render_meshes

log = logging.getLogger(__name__)

WORK_DIR_NAME = "primscene_work"
_STAGE_FRACTION = {"stylize": 0.0, "mesh": 0.25, "grids": 0.5, "dataset": 0.75}


def _err(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


class SceneSession:
    """All mutable state for one scene, guarded by a single lock."""

    def __init__(self, scene_id: str, dataset_dir: str | Path, config: Config, backends):
        self.scene_id = scene_id
        self.config = config
        self.backends = backends
        self.dataset_dir = Path(dataset_dir)
        self.workdir = self.dataset_dir / WORK_DIR_NAME
        self.workdir.mkdir(parents=True, exist_ok=True)

        self.lock = threading.Lock()
        self.ds = load_dataset(self.dataset_dir)
        self.status = "idle"
        self.error: str | None = None
        self.queue: list[ObjectSpec] = []
        self.report = PipelineReport()
        self.job = {"object_index": 0, "object_name": "", "stage": "idle", "total": 0}
        self._worker: threading.Thread | None = None

        state_dir = self.workdir / "scene"
        if (state_dir / "state.json").exists():
            self.state = load_state(state_dir)
        else:
            self.state = SceneState(base_dataset_size=len(self.ds))
        queue_file = self.workdir / "queue.json"
        if queue_file.exists():
            self.queue = [ObjectSpec.from_json(d) for d in json.loads(queue_file.read_text())]
        report_file = self.workdir / "report.csv"
        if report_file.exists():
            self._report_csv = report_file.read_text()
        else:
            self._report_csv = PipelineReport().to_csv()

    # -- helpers (caller holds no lock) -----------------------------------

    def _persist_queue(self) -> None:
        (self.workdir / "queue.json").write_text(
            json.dumps([s.to_json() for s in self.queue], indent=2)
        )

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "scene_id": self.scene_id,
                "status": self.status,
                "error": self.error,
                "frames": len(self.ds),
                "base_dataset_size": self.state.base_dataset_size,
                "inserted": [o.spec.to_json() for o in self.state.inserted],
                "queued": [s.to_json() for s in self.queue],
            }

    def frames_payload(self) -> dict:
        with self.lock:
            k = self.ds.intrinsics
            return {
                "intrinsics": {
                    "fl_x": k.fx, "fl_y": k.fy, "cx": k.cx, "cy": k.cy,
                    "w": k.width, "h": k.height,
                },
                "frames": [
                    {"file_path": f.file_path, "transform_matrix": f.transform.matrix().tolist()}
                    for f in self.ds.frames
                ],
            }

    def queue_object(self, doc: dict):
        try:
            spec = ObjectSpec.from_json(doc)
        except ValueError as e:
            return _err(422, "invalid-spec", str(e))
        with self.lock:
            if self.status == "running":
                return _err(409, "run-active", "cannot edit objects while a run is active")
            taken = {s.name for s in self.queue} | set(self.state.names())
            if spec.name in taken:
                return _err(422, "duplicate-name", f"object name {spec.name!r} already in use")
            self.queue.append(spec)
            self._persist_queue()
            return JSONResponse(status_code=201, content={"object": spec.to_json()})

    def remove_object(self, name: str):
        with self.lock:
            if self.status == "running":
                return _err(409, "run-active", "cannot edit objects while a run is active")
            for i, s in enumerate(self.queue):
                if s.name == name:
                    del self.queue[i]
                    self._persist_queue()
                    return JSONResponse({"removed": name})
            if name in self.state.names():
                return _err(409, "already-inserted", f"{name!r} is inserted; the ledger is permanent")
            return _err(404, "unknown-object", f"no queued object named {name!r}")

    def start_run(self):
        with self.lock:
            if self.status == "running":
                return _err(409, "run-active", "a run is already in progress")
            if not self.queue:
                return _err(422, "empty-queue", "no objects queued")
            specs = list(self.queue)
            self.status = "running"
            self.error = None
            self.job = {
                "object_index": 0,
                "object_name": specs[0].name,
                "stage": "stylize",
                "total": len(specs),
            }
            self._worker = threading.Thread(
                target=self._run_job, args=(specs,), name=f"run-{self.scene_id}", daemon=True
            )
            self._worker.start()
        return JSONResponse(status_code=202, content={"status": "running", "objects": len(specs)})

    def _on_progress(self, name: str, stage: str, index: int) -> None:
        with self.lock:
            self.job = {
                "object_index": index,
                "object_name": name,
                "stage": stage,
                "total": self.job["total"],
            }

    def _run_job(self, specs: list[ObjectSpec]) -> None:
        try:
            scene, ds, report = insert_objects(
                self.state, self.ds, specs, self.backends, self.config,
                workdir=self.workdir, progress=self._on_progress,
            )
        except Exception as e:
            log.exception("run failed for scene %s", self.scene_id)
            with self.lock:
                self.status = "failed"
                self.error = f"{type(e).__name__}: {e}"
            return
        csv_text = report.to_csv()
        (self.workdir / "report.csv").write_text(csv_text)
        with self.lock:
            self.state, self.ds, self.report = scene, ds, report
            self._report_csv = csv_text
            self.queue = []
            self._persist_queue()
            self.status = "done"
            self.job = {**self.job, "stage": "done"}

    def job_payload(self) -> dict:
        with self.lock:
            total = max(self.job["total"], 1)
            if self.status == "done":
                fraction = 1.0
            elif self.status == "running":
                frac = _STAGE_FRACTION.get(self.job["stage"], 0.0)
                fraction = (self.job["object_index"] + frac) / total
            else:
                fraction = 0.0
            return {
                "status": self.status,
                "stage": self.job["stage"],
                "object_name": self.job["object_name"],
                "object_index": self.job["object_index"],
                "total": self.job["total"],
                "fraction": fraction,
                "error": self.error,
            }

    def preview_png(self, view: int, layer: str):
        with self.lock:
            ds, state, queue = self.ds, self.state, list(self.queue)
        if not (0 <= view < len(ds)):
            return _err(404, "unknown-frame", f"frame {view} outside 0..{len(ds) - 1}")
        if layer == "raw":
            return Response(content=ds.image_path(view).read_bytes(), media_type="image/png")
        meshes = state.meshes() + [
            tessellate_primitive(s.primitive, self.config.tessellation_level) for s in queue
        ]
        base = ds.load_image(view)  # uint8: off-mask pixels stay byte-exact
        if meshes:
            overlay = render_meshes(
                ds.view(view), meshes, self.config.render_near, self.config.render_far
            )
            base = composite_over(base, overlay)
        return Response(content=encode_png_bytes(base), media_type="image/png")

    def report_csv(self) -> str:
        with self.lock:
            return self._report_csv


def create_app(config: Config, scenes: dict[str, str | Path]) -> FastAPI:
    """Build the service over named scene dataset directories."""
    backends = make_backends(config)
    sessions = {sid: SceneSession(sid, path, config, backends) for sid, path in scenes.items()}
    app = FastAPI(title="primscene")

    def session(scene_id: str) -> SceneSession | None:
        return sessions.get(scene_id)

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.snapshot()

    @app.get("/scenes/{scene_id}/frames")
    def get_frames(scene_id: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.frames_payload()

    @app.post("/scenes/{scene_id}/objects")
    def post_object(scene_id: str, doc: dict = Body(...)):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.queue_object(doc)

    @app.delete("/scenes/{scene_id}/objects/{name}")
    def delete_object(scene_id: str, name: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.remove_object(name)

    @app.post("/scenes/{scene_id}/run")
    def post_run(scene_id: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.start_run()

    @app.get("/scenes/{scene_id}/jobs/current")
    def get_job(scene_id: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return s.job_payload()

    @app.get("/scenes/{scene_id}/preview")
    def get_preview(scene_id: str, view: int = 0, layer: str = "composite"):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        if layer not in ("composite", "raw"):
            return _err(422, "bad-layer", "layer must be 'composite' or 'raw'")
        return s.preview_png(view, layer)

    @app.get("/scenes/{scene_id}/report")
    def get_report(scene_id: str):
        s = session(scene_id)
        if s is None:
            return _err(404, "unknown-scene", f"no scene named {scene_id!r}")
        return Response(content=s.report_csv(), media_type="text/csv")

    app.state.sessions = sessions
    return app
