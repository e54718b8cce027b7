import type { GizmoMode, IntrinsicsDoc, Mat4, Vec3 } from './types.js';

// Camera conventions shared with the server: poses are camera-to-world,
// the camera looks along local -z with y up, and a world point projects to
// u = cx + fx * (x / -z), v = cy - fy * (y / -z). The viewport reuses the
// same formulas so nothing drawn here can disagree with server-side
// visibility or placement.

/** Points with camera-space z >= -EPS_NEAR count as behind the camera. */
export const EPS_NEAR = 1e-6;

const MAX_ELEVATION_DEG = 89.9;
const MIN_DISTANCE = 1e-6;

export interface ViewportState {
  /** Orbit azimuth in degrees, around world +y. */
  azimuth: number;
  /** Orbit elevation in degrees, strictly inside (-90, 90). */
  elevation: number;
  /** Orbit radius in world units, strictly positive. */
  distance: number;
  target: Vec3;
  /** Name of the currently selected object, if any. */
  selected: string | null;
  gizmo: GizmoMode;
}

export function defaultViewport(): ViewportState {
  return {
    azimuth: 45,
    elevation: 25,
    distance: 8,
    target: [0, 0, 0],
    selected: null,
    gizmo: 'translate',
  };
}

/** Enforce the viewport invariants: distance > 0, elevation inside (-90, 90). */
export function clampViewport(state: ViewportState): ViewportState {
  return {
    ...state,
    elevation: Math.min(MAX_ELEVATION_DEG, Math.max(-MAX_ELEVATION_DEG, state.elevation)),
    distance: Math.max(MIN_DISTANCE, state.distance),
  };
}

export function orbitBy(state: ViewportState, dAzimuth: number, dElevation: number): ViewportState {
  return clampViewport({
    ...state,
    azimuth: state.azimuth + dAzimuth,
    elevation: state.elevation + dElevation,
  });
}

export function zoomBy(state: ViewportState, factor: number): ViewportState {
  return clampViewport({ ...state, distance: state.distance * factor });
}

const DEG = Math.PI / 180;

export function vSub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vDot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function vCross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vNorm(a: Vec3): number {
  return Math.sqrt(vDot(a, a));
}

export function vNormalize(a: Vec3): Vec3 {
  const n = vNorm(a);
  if (n <= 0) throw new Error('cannot normalize a zero vector');
  return vScale(a, 1 / n);
}

/** Eye position of the orbit camera. Same layout as the server's ring cameras. */
export function orbitEye(state: ViewportState): Vec3 {
  const az = state.azimuth * DEG;
  const el = state.elevation * DEG;
  const dir: Vec3 = [
    Math.cos(el) * Math.cos(az),
    Math.sin(el),
    Math.cos(el) * Math.sin(az),
  ];
  return vAdd(state.target, vScale(dir, state.distance));
}

/** Camera-to-world matrix at `eye` with local -z toward `target`, y up. */
export function lookAtPose(eye: Vec3, target: Vec3, upHint: Vec3 = [0, 1, 0]): Mat4 {
  let fwd = vSub(target, eye);
  const d = vNorm(fwd);
  if (d <= 1e-9) throw new Error('eye and target coincide');
  fwd = vScale(fwd, 1 / d);

  let right = vCross(fwd, vNormalize(upHint));
  const rn = vNorm(right);
  if (rn < 1e-6) throw new Error('up direction is parallel to the view direction');
  right = vScale(right, 1 / rn);
  const up = vCross(right, fwd);

  return [
    [right[0], up[0], -fwd[0], eye[0]],
    [right[1], up[1], -fwd[1], eye[1]],
    [right[2], up[2], -fwd[2], eye[2]],
    [0, 0, 0, 1],
  ];
}

export function viewportPose(state: ViewportState): Mat4 {
  return lookAtPose(orbitEye(state), state.target);
}

/** Pinhole intrinsics for a canvas of the given size and vertical field of view. */
export function canvasIntrinsics(width: number, height: number, fovYDeg = 50): IntrinsicsDoc {
  const f = height / 2 / Math.tan((fovYDeg * DEG) / 2);
  return { fl_x: f, fl_y: f, cx: width / 2, cy: height / 2, w: width, h: height };
}

export function worldToCamera(pose: Mat4, p: Vec3): Vec3 {
  // Inverse of a rigid camera-to-world matrix: p_cam = R^T (p - t).
  const dx = p[0] - pose[0][3];
  const dy = p[1] - pose[1][3];
  const dz = p[2] - pose[2][3];
  return [
    pose[0][0] * dx + pose[1][0] * dy + pose[2][0] * dz,
    pose[0][1] * dx + pose[1][1] * dy + pose[2][1] * dz,
    pose[0][2] * dx + pose[1][2] * dy + pose[2][2] * dz,
  ];
}

/** Project a world point to pixels; null if at/behind the camera. */
export function projectPoint(pose: Mat4, k: IntrinsicsDoc, p: Vec3): [number, number] | null {
  const cam = worldToCamera(pose, p);
  const z = cam[2];
  if (z >= -EPS_NEAR) return null;
  return [k.cx + k.fl_x * (cam[0] / -z), k.cy - k.fl_y * (cam[1] / -z)];
}

export interface Ray {
  origin: Vec3;
  dir: Vec3;
}

/** World-space ray through pixel (u, v) of the camera at `pose`. */
export function screenRay(pose: Mat4, k: IntrinsicsDoc, u: number, v: number): Ray {
  const camDir: Vec3 = [(u - k.cx) / k.fl_x, (k.cy - v) / k.fl_y, -1];
  const world: Vec3 = [
    pose[0][0] * camDir[0] + pose[0][1] * camDir[1] + pose[0][2] * camDir[2],
    pose[1][0] * camDir[0] + pose[1][1] * camDir[1] + pose[1][2] * camDir[2],
    pose[2][0] * camDir[0] + pose[2][1] * camDir[1] + pose[2][2] * camDir[2],
  ];
  return { origin: [pose[0][3], pose[1][3], pose[2][3]], dir: vNormalize(world) };
}

/** Intersection with the ground plane y = 0, or null if the ray misses it. */
export function intersectGround(ray: Ray): Vec3 | null {
  if (Math.abs(ray.dir[1]) < 1e-12) return null;
  const t = -ray.origin[1] / ray.dir[1];
  if (t <= 0) return null;
  return vAdd(ray.origin, vScale(ray.dir, t));
}
