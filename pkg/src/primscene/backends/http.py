"""HTTP/JSON clients for remote model servers.

One POST endpoint per operation; images travel as base64-encoded PNG
(depth as 16-bit PNG plus a float scale). Transient failures (connection
errors, timeouts, 5xx) are retried with exponential backoff before the
call gives up; a 4xx means the request itself is bad and is surfaced
immediately with the server's error code and message.
"""

from __future__ import annotations

import base64
import threading
import time

import numpy as np
import requests

from ..dataset import NerfDataset
from ..errors import (
    BackendRequestError,
    BackendUnreachableError,
    ContractViolationError,
)
from ..geometry import CameraIntrinsics, TriMesh
from ..images import DEPTH_QUANT, decode_png_bytes, encode_png_bytes, to_float
from . import GridEditRequest, MeshGenRequest, RenderSceneRequest, StylizeRequest
from .meshio import decode_mesh


def _b64_png(img: np.ndarray) -> str:
    return base64.b64encode(encode_png_bytes(img)).decode("ascii")


def _b64_depth(depth: np.ndarray) -> tuple[str, float]:
    d = np.asarray(depth, dtype=np.float64)
    scale = float(d.max()) if d.size else 0.0
    if scale <= 0:
        q = np.zeros(d.shape, dtype=np.uint16)
        scale = 0.0
    else:
        q = np.round(np.clip(d / scale, 0.0, 1.0) * DEPTH_QUANT).astype(np.uint16)
    return _b64_png(q), scale


def _image_from_b64(payload, field: str) -> np.ndarray:
    if not isinstance(payload, str):
        raise ContractViolationError(f"response field '{field}' is not a string")
    try:
        raw = base64.b64decode(payload, validate=True)
        img = decode_png_bytes(raw)
    except Exception as e:
        raise ContractViolationError(f"response field '{field}' is not a PNG: {e}") from e
    return to_float(img)


def _intrinsics_json(k: CameraIntrinsics) -> dict:
    return {
        "fl_x": k.fx,
        "fl_y": k.fy,
        "cx": k.cx,
        "cy": k.cy,
        "w": k.width,
        "h": k.height,
    }


class HttpBackends:
    """Clients for the four services; shareable across threads.

    In-flight requests per endpoint are bounded by a semaphore so a burst
    of pipeline work cannot overload a model server.
    """

    prefills_blank_slot = False

    def __init__(self, config, session: requests.Session | None = None, sleep=time.sleep):
        self._urls = {
            "stylize": config.stylizer_url.rstrip("/") + "/stylize",
            "generate_mesh": config.meshgen_url.rstrip("/") + "/generate_mesh",
            "edit_grid": config.grid_editor_url.rstrip("/") + "/edit_grid",
            "render_scene": config.renderer_url.rstrip("/") + "/render_scene",
        }
        self._session = session or requests.Session()
        self._sleep = sleep
        self._timeout = float(config.request_timeout)
        self._attempts = int(config.retry_attempts)
        self._backoff = float(config.retry_backoff_base)
        self._gates = {
            op: threading.Semaphore(int(config.backend_concurrency)) for op in self._urls
        }

    # -- operations ------------------------------------------------------

    def stylize(self, req: StylizeRequest) -> np.ndarray:
        body = {"image": _b64_png(req.image), "prompt": req.prompt}
        return _image_from_b64(self._post("stylize", body).get("image"), "image")

    def generate_mesh(self, req: MeshGenRequest) -> TriMesh:
        body = {"image": _b64_png(req.image)}
        payload = self._post("generate_mesh", body).get("mesh")
        if not isinstance(payload, str):
            raise ContractViolationError("response field 'mesh' is not a string")
        try:
            raw = base64.b64decode(payload, validate=True)
        except Exception as e:
            raise ContractViolationError(f"mesh payload is not base64: {e}") from e
        return decode_mesh(raw)

    def edit_grid(self, req: GridEditRequest) -> np.ndarray:
        depth_b64, depth_scale = _b64_depth(req.depth_grid)
        body = {
            "color_grid": _b64_png(req.color_grid),
            "depth_grid": depth_b64,
            "depth_scale": depth_scale,
            "mask_grid": _b64_png(req.mask_grid.astype(np.float32)),
            "prompt": req.prompt,
            "layout": {
                "rows": req.rows,
                "cols": req.cols,
                "tile_w": req.tile_w,
                "tile_h": req.tile_h,
                "blank_index": req.blank_index,
            },
        }
        return _image_from_b64(self._post("edit_grid", body).get("image"), "image")

    def render_scene(self, req: RenderSceneRequest, ds: NerfDataset) -> np.ndarray:
        body = {
            "transform_matrix": req.view.pose.matrix().tolist(),
            "intrinsics": _intrinsics_json(req.view.intrinsics),
        }
        return _image_from_b64(self._post("render_scene", body).get("image"), "image")

    # -- transport -------------------------------------------------------

    def _post(self, op: str, body: dict) -> dict:
        url = self._urls[op]
        last_reason = "no attempt made"
        with self._gates[op]:
            for attempt in range(self._attempts):
                if attempt:
                    self._sleep(self._backoff * 2 ** (attempt - 1))
                try:
                    resp = self._session.post(url, json=body, timeout=self._timeout)
                except requests.RequestException as e:
                    last_reason = f"{type(e).__name__}: {e}"
                    continue
                if resp.status_code == 200:
                    return self._parse_json(resp, op)
                if 400 <= resp.status_code < 500:
                    code, message = self._error_body(resp)
                    raise BackendRequestError(
                        f"{op} rejected with HTTP {resp.status_code} [{code}]: {message}"
                    )
                code, message = self._error_body(resp)
                last_reason = f"HTTP {resp.status_code} [{code}]: {message}"
        raise BackendUnreachableError(
            f"{op} failed after {self._attempts} attempts; last error: {last_reason}"
        )

    @staticmethod
    def _parse_json(resp, op: str) -> dict:
        try:
            out = resp.json()
        except ValueError as e:
            raise ContractViolationError(f"{op} returned a non-JSON body") from e
        if not isinstance(out, dict):
            raise ContractViolationError(f"{op} returned {type(out).__name__}, not an object")
        return out

    @staticmethod
    def _error_body(resp) -> tuple[str, str]:
        try:
            err = resp.json().get("error", {})
            return str(err.get("code", "unknown")), str(err.get("message", ""))
        except Exception:
            return "unknown", resp.text[:200] if resp.text else ""
