import { projectPoint } from './camera.js';
import type { Segment } from './frusta.js';
import type { IntrinsicsDoc, Mat4, ObjectSpecDoc, Vec3 } from './types.js';
import { translationOf } from './types.js';

// Axis gizmo for refining a placed primitive. Three world-axis handles are
// drawn from the object's center; dragging one converts the pointer motion
// into a world-space delta along that axis, which placement.applyGizmoDrag
// turns into a new spec to POST.

export type Axis = 0 | 1 | 2;

export const AXIS_COLORS = ['#e05555', '#55c055', '#5577e0'] as const;

const PICK_RADIUS_PX = 8;

export interface GizmoHandle {
  axis: Axis;
  segment: Segment;
}

/** World-space handle segments for the gizmo at the spec's translation. */
export function gizmoHandles(spec: ObjectSpecDoc, length = 1): GizmoHandle[] {
  const center = translationOf(spec.primitive.transform);
  return ([0, 1, 2] as const).map((axis) => {
    const tip: Vec3 = [...center];
    tip[axis] += length;
    return { axis, segment: { a: center, b: tip } };
  });
}

function distanceToSegment2d(
  px: number,
  py: number,
  x1: number,
  y1: number,
  x2: number,
  y2: number,
): number {
  const dx = x2 - x1;
  const dy = y2 - y1;
  const lenSq = dx * dx + dy * dy;
  let t = lenSq > 0 ? ((px - x1) * dx + (py - y1) * dy) / lenSq : 0;
  t = Math.max(0, Math.min(1, t));
  const cx = x1 + t * dx;
  const cy = y1 + t * dy;
  return Math.hypot(px - cx, py - cy);
}

/** Axis whose projected handle is nearest the pointer, or null if none is close. */
export function pickAxis(
  pose: Mat4,
  k: IntrinsicsDoc,
  spec: ObjectSpecDoc,
  u: number,
  v: number,
  length = 1,
): Axis | null {
  let best: Axis | null = null;
  let bestDist = PICK_RADIUS_PX;
  for (const handle of gizmoHandles(spec, length)) {
    const a = projectPoint(pose, k, handle.segment.a);
    const b = projectPoint(pose, k, handle.segment.b);
    if (a === null || b === null) continue;
    const d = distanceToSegment2d(u, v, a[0], a[1], b[0], b[1]);
    if (d < bestDist) {
      bestDist = d;
      best = handle.axis;
    }
  }
  return best;
}

/**
 * World-space delta along `axis` for a pointer drag from (u0, v0) to
 * (u1, v1): the pointer motion is projected onto the axis's screen
 * direction and divided by its pixels-per-world-unit.
 */
export function dragDelta(
  pose: Mat4,
  k: IntrinsicsDoc,
  spec: ObjectSpecDoc,
  axis: Axis,
  u0: number,
  v0: number,
  u1: number,
  v1: number,
): number {
  const center = translationOf(spec.primitive.transform);
  const tip: Vec3 = [...center];
  tip[axis] += 1;
  const c = projectPoint(pose, k, center);
  const t = projectPoint(pose, k, tip);
  if (c === null || t === null) return 0;
  const sx = t[0] - c[0];
  const sy = t[1] - c[1];
  const lenSq = sx * sx + sy * sy;
  if (lenSq < 1e-12) return 0; // axis points straight at the camera
  return ((u1 - u0) * sx + (v1 - v0) * sy) / lenSq;
}
