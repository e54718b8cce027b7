import type { FramesPayload, IntrinsicsDoc, Mat4, ObjectSpecDoc, Vec3 } from './types.js';

// Wireframe geometry for the viewport: dataset camera frusta (so users can
// see which regions have capture coverage before placing anything there)
// and outlines of queued/inserted primitives. Everything is expressed as
// world-space line segments; drawing them is the renderer's job.

export interface Segment {
  a: Vec3;
  b: Vec3;
}

function applyPose(pose: Mat4, p: Vec3): Vec3 {
  return [
    pose[0][0] * p[0] + pose[0][1] * p[1] + pose[0][2] * p[2] + pose[0][3],
    pose[1][0] * p[0] + pose[1][1] * p[1] + pose[1][2] * p[2] + pose[1][3],
    pose[2][0] * p[0] + pose[2][1] * p[1] + pose[2][2] * p[2] + pose[2][3],
  ];
}

/**
 * Camera-space corners of the image rectangle at camera distance `depth`,
 * using the same pixel mapping the server projects with.
 */
function imageCorners(k: IntrinsicsDoc, depth: number): Vec3[] {
  const corners: Vec3[] = [];
  for (const [u, v] of [
    [0, 0],
    [k.w, 0],
    [k.w, k.h],
    [0, k.h],
  ] as const) {
    corners.push([((u - k.cx) / k.fl_x) * depth, ((k.cy - v) / k.fl_y) * depth, -depth]);
  }
  return corners;
}

/** Wireframe pyramid for one camera: apex plus the image rectangle at `depth`. */
export function frustumSegments(k: IntrinsicsDoc, pose: Mat4, depth: number): Segment[] {
  const apex = applyPose(pose, [0, 0, 0]);
  const rect = imageCorners(k, depth).map((c) => applyPose(pose, c));
  const segments: Segment[] = [];
  for (let i = 0; i < 4; i++) {
    segments.push({ a: apex, b: rect[i] });
    segments.push({ a: rect[i], b: rect[(i + 1) % 4] });
  }
  // short "up" tick on the top edge so the roll of the camera is visible
  const top: Vec3 = [0, ((k.cy + 0.25 * k.h) / k.fl_y) * depth, -depth];
  segments.push({ a: applyPose(pose, top), b: rect[0] });
  segments.push({ a: applyPose(pose, top), b: rect[1] });
  return segments;
}

/** Frusta for every dataset camera, sized relative to the scene spread. */
export function datasetFrusta(payload: FramesPayload, depth = 0.4): Segment[] {
  const segments: Segment[] = [];
  for (const frame of payload.frames) {
    segments.push(...frustumSegments(payload.intrinsics, frame.transform_matrix, depth));
  }
  return segments;
}

function transformLocal(spec: ObjectSpecDoc, p: Vec3): Vec3 {
  // Same order as the server applies: per-axis scale, then the rigid pose.
  const s = spec.primitive.scale;
  return applyPose(spec.primitive.transform, [p[0] * s[0], p[1] * s[1], p[2] * s[2]]);
}

function circlePoints(axis: 0 | 1 | 2, level: number, n = 24): Vec3[] {
  const pts: Vec3[] = [];
  for (let i = 0; i < n; i++) {
    const t = (2 * Math.PI * i) / n;
    const p: Vec3 = [0, 0, 0];
    p[(axis + 1) % 3] = Math.cos(t);
    p[(axis + 2) % 3] = Math.sin(t);
    p[axis] = level;
    pts.push(p);
  }
  return pts;
}

function loopSegments(points: Vec3[]): Segment[] {
  return points.map((p, i) => ({ a: p, b: points[(i + 1) % points.length] }));
}

/** Local-space outline of a unit primitive (which spans [-1, 1] per axis). */
function unitOutline(kind: ObjectSpecDoc['primitive']['kind']): Segment[] {
  if (kind === 'box') {
    const c: Vec3[] = [];
    for (const x of [-1, 1]) for (const y of [-1, 1]) for (const z of [-1, 1]) c.push([x, y, z]);
    const edges: [number, number][] = [
      [0, 1], [2, 3], [4, 5], [6, 7],
      [0, 2], [1, 3], [4, 6], [5, 7],
      [0, 4], [1, 5], [2, 6], [3, 7],
    ];
    return edges.map(([i, j]) => ({ a: c[i], b: c[j] }));
  }
  if (kind === 'sphere') {
    return [
      ...loopSegments(circlePoints(0, 0)),
      ...loopSegments(circlePoints(1, 0)),
      ...loopSegments(circlePoints(2, 0)),
    ];
  }
  // cylinder: axis along local y, radius 1, caps at y = -1 and y = 1
  const segments = [...loopSegments(circlePoints(1, -1)), ...loopSegments(circlePoints(1, 1))];
  for (const t of [0, Math.PI / 2, Math.PI, (3 * Math.PI) / 2]) {
    segments.push({ a: [Math.cos(t), -1, Math.sin(t)], b: [Math.cos(t), 1, Math.sin(t)] });
  }
  return segments;
}

/** World-space outline of a placed primitive, from its server-echoed spec. */
export function primitiveWireframe(spec: ObjectSpecDoc): Segment[] {
  return unitOutline(spec.primitive.kind).map((seg) => ({
    a: transformLocal(spec, seg.a),
    b: transformLocal(spec, seg.b),
  }));
}

/** Reference grid on the ground plane, centered on the origin. */
export function groundGrid(halfExtent = 5, step = 1): Segment[] {
  const segments: Segment[] = [];
  for (let i = -halfExtent; i <= halfExtent; i += step) {
    segments.push({ a: [i, 0, -halfExtent], b: [i, 0, halfExtent] });
    segments.push({ a: [-halfExtent, 0, i], b: [halfExtent, 0, i] });
  }
  return segments;
}
