import io
import threading
import time

import numpy as np
import numpy.testing as npt
import pytest
from fastapi.testclient import TestClient

from primscene.config import Config
from primscene.dataset import load_dataset
from primscene.geometry import Pose, Primitive, PrimitiveKind, tessellate_primitive
from primscene.images import decode_png_bytes, to_uint8
from primscene.integration import REPORT_HEADER, ObjectSpec, Strategy
from primscene.raster import render_meshes
from primscene.service import WORK_DIR_NAME, create_app
from primscene.synth import make_ring_dataset

CFG = Config(tile_w=32, tile_h=32, tessellation_level=6)


def object_doc(name="lamp", t=(0, 0, 0), scale=0.5, strategy="AddNewImages",
               prompt="a brass reading lamp"):
    prim = Primitive(PrimitiveKind.SPHERE, Pose(np.eye(3), np.asarray(t, float)), np.full(3, scale))
    return ObjectSpec(name=name, primitive=prim, prompt=prompt, strategy=strategy).to_json()


@pytest.fixture()
def scene_root(tmp_path):
    root = tmp_path / "scene_a"
    make_ring_dataset(root, n_frames=10, width=64, height=48)
    return root


@pytest.fixture()
def client(scene_root):
    app = create_app(CFG, {"a": scene_root})
    with TestClient(app) as c:
        yield c


def wait_done(client, sid="a", timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/scenes/{sid}/jobs/current").json()
        if job["status"] in ("done", "failed"):
            return job
        time.sleep(0.02)
    raise AssertionError("run did not finish in time")


def test_unknown_scene_is_404_everywhere(client):
    checks = [
        ("get", "/scenes/nope"),
        ("get", "/scenes/nope/frames"),
        ("post", "/scenes/nope/objects"),
        ("delete", "/scenes/nope/objects/x"),
        ("post", "/scenes/nope/run"),
        ("get", "/scenes/nope/jobs/current"),
        ("get", "/scenes/nope/preview"),
        ("get", "/scenes/nope/report"),
    ]
    for method, url in checks:
        r = getattr(client, method)(url, **({"json": object_doc()} if method == "post" else {}))
        assert r.status_code == 404, url
        assert r.json()["error"]["code"] == "unknown-scene", url


def test_scene_snapshot(client):
    r = client.get("/scenes/a")
    assert r.status_code == 200
    body = r.json()
    assert body["scene_id"] == "a"
    assert body["status"] == "idle"
    assert body["frames"] == 10
    assert body["base_dataset_size"] == 10
    assert body["inserted"] == [] and body["queued"] == []


def test_frames_payload(client):
    body = client.get("/scenes/a/frames").json()
    assert body["intrinsics"]["w"] == 64 and body["intrinsics"]["h"] == 48
    assert set(body["intrinsics"]) == {"fl_x", "fl_y", "cx", "cy", "w", "h"}
    assert len(body["frames"]) == 10
    frame = body["frames"][0]
    assert frame["file_path"].endswith(".png")
    m = np.asarray(frame["transform_matrix"])
    assert m.shape == (4, 4)
    npt.assert_allclose(m[3], [0, 0, 0, 1], atol=1e-12)


def test_queue_and_remove_objects(client, scene_root):
    r = client.post("/scenes/a/objects", json=object_doc("sofa"))
    assert r.status_code == 201
    assert r.json()["object"]["name"] == "sofa"

    # Echoed by the snapshot and persisted to disk.
    snap = client.get("/scenes/a").json()
    assert [o["name"] for o in snap["queued"]] == ["sofa"]
    assert (scene_root / WORK_DIR_NAME / "queue.json").exists()

    r = client.post("/scenes/a/objects", json=object_doc("sofa"))
    assert r.status_code == 422 and r.json()["error"]["code"] == "duplicate-name"

    bad = object_doc("ok")
    bad["primitive"]["scale"] = "wat"
    r = client.post("/scenes/a/objects", json=bad)
    assert r.status_code == 422 and r.json()["error"]["code"] == "invalid-spec"

    r = client.delete("/scenes/a/objects/sofa")
    assert r.status_code == 200 and r.json()["removed"] == "sofa"
    assert client.get("/scenes/a").json()["queued"] == []

    r = client.delete("/scenes/a/objects/sofa")
    assert r.status_code == 404 and r.json()["error"]["code"] == "unknown-object"


def test_run_requires_objects(client):
    r = client.post("/scenes/a/run")
    assert r.status_code == 422 and r.json()["error"]["code"] == "empty-queue"


def test_full_run_and_report(client, scene_root):
    client.post("/scenes/a/objects", json=object_doc("sofa", t=(0.3, 0, 0)))
    client.post("/scenes/a/objects", json=object_doc(
        "rug", t=(-0.3, 0, 0), strategy="ModifyExisting"))

    r = client.post("/scenes/a/run")
    assert r.status_code == 202
    assert r.json() == {"status": "running", "objects": 2}

    job = wait_done(client)
    assert job["status"] == "done"
    assert job["fraction"] == 1.0
    assert job["error"] is None

    snap = client.get("/scenes/a").json()
    assert snap["status"] == "done"
    assert [o["name"] for o in snap["inserted"]] == ["sofa", "rug"]
    assert snap["queued"] == []
    assert snap["frames"] == 10 + 8  # AddNewImages added a ring of 8

    r = client.get("/scenes/a/report")
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/csv")
    lines = r.text.strip().split("\n")
    assert lines[0] == ",".join(REPORT_HEADER)
    assert len(lines) == 3
    assert (scene_root / WORK_DIR_NAME / "report.csv").read_text() == r.text

    # Dataset on disk matches what the service reports.
    assert len(load_dataset(scene_root)) == 18


def test_preview_raw_returns_exact_file_bytes(client, scene_root):
    ds = load_dataset(scene_root)
    r = client.get("/scenes/a/preview", params={"view": 3, "layer": "raw"})
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert r.content == ds.image_path(3).read_bytes()
    # GETs are idempotent.
    assert client.get("/scenes/a/preview", params={"view": 3, "layer": "raw"}).content == r.content


def test_preview_composite_differs_exactly_on_silhouette(client, scene_root):
    client.post("/scenes/a/objects", json=object_doc("orb", t=(0, 0.2, 0), scale=0.6))
    raw = decode_png_bytes(
        client.get("/scenes/a/preview", params={"view": 0, "layer": "raw"}).content
    )
    comp = decode_png_bytes(
        client.get("/scenes/a/preview", params={"view": 0, "layer": "composite"}).content
    )
    ds = load_dataset(scene_root)
    prim = Primitive(PrimitiveKind.SPHERE, Pose(np.eye(3), [0, 0.2, 0]), np.full(3, 0.6))
    overlay = render_meshes(
        ds.view(0), [tessellate_primitive(prim, CFG.tessellation_level)],
        CFG.render_near, CFG.render_far,
    )
    m = overlay.mask.astype(bool)
    assert m.any() and not m.all()
    npt.assert_array_equal(comp[~m], raw[~m])
    npt.assert_array_equal(comp[m], to_uint8(overlay.color)[m])


def test_preview_without_objects_equals_raw(client):
    raw = client.get("/scenes/a/preview", params={"view": 1, "layer": "raw"}).content
    comp = client.get("/scenes/a/preview", params={"view": 1, "layer": "composite"}).content
    npt.assert_array_equal(decode_png_bytes(comp), decode_png_bytes(raw))


def test_preview_rejects_bad_arguments(client):
    r = client.get("/scenes/a/preview", params={"view": 99})
    assert r.status_code == 404 and r.json()["error"]["code"] == "unknown-frame"
    r = client.get("/scenes/a/preview", params={"view": 0, "layer": "wireframe"})
    assert r.status_code == 422 and r.json()["error"]["code"] == "bad-layer"


class GatedBackends:
    """Wraps real backends; the first stylize call blocks until released."""

    def __init__(self, inner):
        self._inner = inner
        self.prefills_blank_slot = inner.prefills_blank_slot
        self.release = threading.Event()
        self.entered = threading.Event()

    def stylize(self, req):
        self.entered.set()
        assert self.release.wait(timeout=60.0), "test never released the gate"
        return self._inner.stylize(req)

    def __getattr__(self, name):
        return getattr(self._inner, name)


def test_mutations_conflict_while_running(client):
    session = client.app.state.sessions["a"]
    gated = GatedBackends(session.backends)
    session.backends = gated

    client.post("/scenes/a/objects", json=object_doc("sofa"))
    assert client.post("/scenes/a/run").status_code == 202
    assert gated.entered.wait(timeout=30.0)
    try:
        job = client.get("/scenes/a/jobs/current").json()
        assert job["status"] == "running"
        assert job["stage"] == "stylize"
        assert 0.0 <= job["fraction"] < 1.0
        assert client.get("/scenes/a").json()["status"] == "running"

        r = client.post("/scenes/a/run")
        assert r.status_code == 409 and r.json()["error"]["code"] == "run-active"
        r = client.post("/scenes/a/objects", json=object_doc("lamp"))
        assert r.status_code == 409 and r.json()["error"]["code"] == "run-active"
        r = client.delete("/scenes/a/objects/sofa")
        assert r.status_code == 409 and r.json()["error"]["code"] == "run-active"

        # Reads still serve while the worker is busy.
        assert client.get("/scenes/a/preview", params={"view": 0, "layer": "raw"}).status_code == 200
    finally:
        gated.release.set()
    assert wait_done(client)["status"] == "done"


class ExplodingBackends:
    prefills_blank_slot = True

    def __init__(self, inner):
        self._inner = inner

    def stylize(self, req):
        raise RuntimeError("stylizer fell over")

    def __getattr__(self, name):
        return getattr(self._inner, name)


def test_failed_run_reports_error_and_keeps_queue(client, scene_root):
    session = client.app.state.sessions["a"]
    session.backends = ExplodingBackends(session.backends)

    client.post("/scenes/a/objects", json=object_doc("sofa"))
    assert client.post("/scenes/a/run").status_code == 202
    job = wait_done(client)
    assert job["status"] == "failed"
    assert "stylizer fell over" in job["error"]

    snap = client.get("/scenes/a").json()
    assert snap["status"] == "failed"
    assert [o["name"] for o in snap["queued"]] == ["sofa"]  # queue preserved
    assert snap["inserted"] == []
    assert snap["frames"] == 10  # dataset untouched


def test_state_survives_app_restart(scene_root):
    app1 = create_app(CFG, {"a": scene_root})
    with TestClient(app1) as c1:
        c1.post("/scenes/a/objects", json=object_doc("sofa", t=(0.2, 0, 0)))
        c1.post("/scenes/a/objects", json=object_doc("lamp", t=(-0.2, 0, 0)))
        c1.post("/scenes/a/run")
        wait_done(c1)
        report1 = c1.get("/scenes/a/report").text
        c1.post("/scenes/a/objects", json=object_doc("rug", t=(0, 0, 0.3)))

    # A brand-new app over the same directory restores ledger, queue, report.
    app2 = create_app(CFG, {"a": scene_root})
    with TestClient(app2) as c2:
        snap = c2.get("/scenes/a").json()
        assert [o["name"] for o in snap["inserted"]] == ["sofa", "lamp"]
        assert [o["name"] for o in snap["queued"]] == ["rug"]
        assert snap["frames"] == 10 + 16
        assert c2.get("/scenes/a/report").text == report1
        # Inserted names stay reserved after restart.
        r = c2.post("/scenes/a/objects", json=object_doc("sofa"))
        assert r.status_code == 422 and r.json()["error"]["code"] == "duplicate-name"
        # Deleting an inserted object is refused: the ledger is permanent.
        r = c2.delete("/scenes/a/objects/sofa")
        assert r.status_code == 409 and r.json()["error"]["code"] == "already-inserted"


def test_multiple_scenes_are_isolated(tmp_path):
    root_a, root_b = tmp_path / "a", tmp_path / "b"
    make_ring_dataset(root_a, n_frames=6, width=48, height=36)
    make_ring_dataset(root_b, n_frames=9, width=48, height=36)
    with TestClient(create_app(CFG, {"a": root_a, "b": root_b})) as c:
        c.post("/scenes/a/objects", json=object_doc("sofa"))
        assert c.get("/scenes/a").json()["frames"] == 6
        assert c.get("/scenes/b").json()["frames"] == 9
        assert c.get("/scenes/b").json()["queued"] == []
