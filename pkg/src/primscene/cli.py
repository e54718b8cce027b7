"""Command-line interface.

A "scene" on disk is a dataset directory (transforms.json + images); queued
objects, ledgers, job state and reports live under primscene_work/ inside
it, shared with the HTTP service so the two front ends see the same state.

Exit codes: 0 success, 1 validation error (bad input, bad dataset, empty
queue), 2 pipeline failure (a run that started and then failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .backends import make_backends
from .config import Config
from .dataset import load_dataset
from .errors import DatasetError, PrimsceneError
from .geometry import Pose, Primitive, PrimitiveKind
from .integration import ObjectSpec, Strategy, insert_objects, load_state, SceneState
from .service import WORK_DIR_NAME

log = logging.getLogger(__name__)


def _queue_path(scene: Path) -> Path:
    return scene / WORK_DIR_NAME / "queue.json"


def _load_queue(scene: Path) -> list[ObjectSpec]:
    qp = _queue_path(scene)
    if not qp.exists():
        return []
    return [ObjectSpec.from_json(d) for d in json.loads(qp.read_text())]


def _save_queue(scene: Path, specs: list[ObjectSpec]) -> None:
    qp = _queue_path(scene)
    qp.parent.mkdir(parents=True, exist_ok=True)
    qp.write_text(json.dumps([s.to_json() for s in specs], indent=2))


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as e:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from e


def _parse_pose(text: str) -> Pose:
    vals = _parse_floats(text, "--pose")
    if len(vals) == 3:
        return Pose(np.eye(3), np.array(vals))
    if len(vals) == 16:
        return Pose.from_matrix(np.array(vals).reshape(4, 4))
    raise ValueError("--pose takes 'tx,ty,tz' or 16 row-major matrix entries")


def _parse_scale(text: str) -> np.ndarray:
    vals = _parse_floats(text, "--scale")
    if len(vals) == 1:
        return np.full(3, vals[0])
    if len(vals) == 3:
        return np.array(vals)
    raise ValueError("--scale takes one uniform value or 'sx,sy,sz'")


def cmd_validate(args) -> int:
    ds = load_dataset(args.dataset)
    print(f"{len(ds)} frames")
    return 0


def cmd_place(args) -> int:
    scene = Path(args.scene)
    load_dataset(scene)  # fail early if this is not a scene directory
    queue = _load_queue(scene)
    name = args.name or f"{args.kind}{len(queue)}"
    spec = ObjectSpec(
        name=name,
        primitive=Primitive(PrimitiveKind(args.kind), _parse_pose(args.pose), _parse_scale(args.scale)),
        prompt=args.prompt,
        strategy=Strategy(args.strategy),
    )
    spec.validate()
    if name in {s.name for s in queue}:
        raise ValueError(f"object name {name!r} already queued")
    queue.append(spec)
    _save_queue(scene, queue)
    print(f"queued {name} ({len(queue)} object(s) pending)")
    return 0


def cmd_run(args) -> int:
    scene = Path(args.scene)
    config = Config.load(args.config)
    ds = load_dataset(scene)
    queue = _load_queue(scene)
    if not queue:
        print("no objects queued", file=sys.stderr)
        return 1

    workdir = scene / WORK_DIR_NAME
    state_dir = workdir / "scene"
    if (state_dir / "state.json").exists():
        state = load_state(state_dir)
    else:
        state = SceneState(base_dataset_size=len(ds))

    backends = make_backends(config)
    try:
        state, ds, report = insert_objects(
            state, ds, queue, backends, config, workdir=workdir, resume=args.resume
        )
    except PrimsceneError as e:
        print(f"pipeline failed: {e}", file=sys.stderr)
        return 2
    csv_text = report.to_csv()
    (workdir / "report.csv").write_text(csv_text)
    _save_queue(scene, [])
    print(csv_text, end="")
    return 0


def cmd_report(args) -> int:
    path = Path(args.scene) / WORK_DIR_NAME / "report.csv"
    if not path.exists():
        print(f"no report found at {path}", file=sys.stderr)
        return 1
    text = path.read_text()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = Config.load(args.config)
    scenes = {}
    for item in args.scene:
        if "=" not in item:
            raise ValueError(f"--scene takes id=dataset_dir, got {item!r}")
        sid, path = item.split("=", 1)
        scenes[sid] = Path(path)
    if not scenes:
        raise ValueError("serve needs at least one --scene id=dataset_dir")
    app = create_app(config, scenes)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="primscene", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="load a dataset and report its frame count")
    v.add_argument("dataset")
    v.set_defaults(fn=cmd_validate)

    pl = sub.add_parser("place", help="queue a primitive for the next run")
    pl.add_argument("scene")
    pl.add_argument("--kind", required=True, choices=[k.value for k in PrimitiveKind])
    pl.add_argument("--pose", required=True, help="'tx,ty,tz' or 16 row-major matrix entries")
    pl.add_argument("--scale", required=True, help="uniform value or 'sx,sy,sz' half-extents")
    pl.add_argument("--prompt", required=True)
    pl.add_argument("--name", default=None)
    pl.add_argument(
        "--strategy",
        default=Strategy.ADD_NEW_IMAGES.value,
        choices=[s.value for s in Strategy],
    )
    pl.set_defaults(fn=cmd_place)

    r = sub.add_parser("run", help="insert every queued object into the scene")
    r.add_argument("scene")
    r.add_argument("--config", default=None)
    r.add_argument("--resume", action="store_true", help="skip objects a previous run completed")
    r.set_defaults(fn=cmd_run)

    rp = sub.add_parser("report", help="print the timing report of the last run")
    rp.add_argument("scene")
    rp.add_argument("--out", default=None, help="also write the CSV here")
    rp.set_defaults(fn=cmd_report)

    sv = sub.add_parser("serve", help="start the HTTP service")
    sv.add_argument("--config", default=None)
    sv.add_argument("--scene", action="append", default=[], help="id=dataset_dir (repeatable)")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, DatasetError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PrimsceneError as e:
        print(f"pipeline failed: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
