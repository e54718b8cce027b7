import { intersectGround, screenRay } from './camera.js';
import type { Mat4, Vec3 } from './types.js';
import type {
  GizmoMode,
  IntrinsicsDoc,
  ObjectSpecDoc,
  PrimitiveKind,
  Strategy,
} from './types.js';
import { identityMat4 } from './types.js';

// Placement and gizmo edits. The flow is place-then-adjust: a click drops a
// default-sized primitive where the pick ray hits the ground plane, and the
// gizmo refines pose or scale afterwards. Edits never mutate the input spec;
// each returns a fresh document to POST, and the server's echo is what the
// viewport renders.

export const DEFAULT_SCALE: [number, number, number] = [0.5, 0.5, 0.5];

const MIN_SCALE = 1e-3;

export function translationPose(p: Vec3): Mat4 {
  const m = identityMat4();
  m[0][3] = p[0];
  m[1][3] = p[1];
  m[2][3] = p[2];
  return m;
}

/** First free name of the form kind0, kind1, ... */
export function uniqueName(kind: PrimitiveKind, taken: Iterable<string>): string {
  const set = new Set(taken);
  for (let i = 0; ; i++) {
    const name = `${kind}${i}`;
    if (!set.has(name)) return name;
  }
}

export interface PlacementOptions {
  name: string;
  prompt: string;
  kind: PrimitiveKind;
  strategy?: Strategy;
  scale?: [number, number, number];
}

/** Spec for a primitive resting on the ground at `point`. */
export function specAtPoint(point: Vec3, opts: PlacementOptions): ObjectSpecDoc {
  const scale = opts.scale ?? DEFAULT_SCALE;
  // unit primitives span [-1, 1] in y, so lift by scale[1] to sit on y = 0
  const center: Vec3 = [point[0], point[1] + scale[1], point[2]];
  return {
    name: opts.name,
    prompt: opts.prompt,
    strategy: opts.strategy ?? 'AddNewImages',
    primitive: { kind: opts.kind, transform: translationPose(center), scale: [...scale] },
  };
}

/**
 * Click-to-place: cast a ray through the clicked pixel of the viewport
 * camera and drop the primitive where it hits the ground plane. Returns
 * null when the click misses the ground (e.g. aiming at the sky).
 */
export function placeAtGround(
  pose: Mat4,
  k: IntrinsicsDoc,
  u: number,
  v: number,
  opts: PlacementOptions,
): ObjectSpecDoc | null {
  const hit = intersectGround(screenRay(pose, k, u, v));
  if (hit === null) return null;
  return specAtPoint(hit, opts);
}

function cloneSpec(spec: ObjectSpecDoc): ObjectSpecDoc {
  return {
    ...spec,
    primitive: {
      kind: spec.primitive.kind,
      transform: spec.primitive.transform.map((row) => [...row]),
      scale: [...spec.primitive.scale],
    },
  };
}

/** New spec with the pose translated by `delta` along world axis `axis`. */
export function translateSpec(spec: ObjectSpecDoc, axis: 0 | 1 | 2, delta: number): ObjectSpecDoc {
  const out = cloneSpec(spec);
  out.primitive.transform[axis][3] += delta;
  return out;
}

/** New spec with the half-extent along `axis` grown by `delta` (kept positive). */
export function scaleSpec(spec: ObjectSpecDoc, axis: 0 | 1 | 2, delta: number): ObjectSpecDoc {
  const out = cloneSpec(spec);
  out.primitive.scale[axis] = Math.max(MIN_SCALE, out.primitive.scale[axis] + delta);
  return out;
}

/** Apply a committed gizmo drag along one axis to a spec. */
export function applyGizmoDrag(
  spec: ObjectSpecDoc,
  mode: GizmoMode,
  axis: 0 | 1 | 2,
  delta: number,
): ObjectSpecDoc {
  return mode === 'translate' ? translateSpec(spec, axis, delta) : scaleSpec(spec, axis, delta);
}
