// Wire types for the scene service JSON API. Field names match the server
// payloads exactly; the server is authoritative for all of them.

/** Row-major 4x4 camera-to-world / object-to-world matrix. */
export type Mat4 = number[][];

export type Vec3 = [number, number, number];

export type PrimitiveKind = 'box' | 'sphere' | 'cylinder';

export type Strategy = 'AddNewImages' | 'ModifyExisting';

export type GizmoMode = 'translate' | 'scale';

export interface PrimitiveDoc {
  kind: PrimitiveKind;
  /** Rigid pose (rotation + translation). Unit primitives span [-1, 1]^3. */
  transform: Mat4;
  /** Per-axis half-extents applied before the pose. */
  scale: [number, number, number];
}

export interface ObjectSpecDoc {
  name: string;
  prompt: string;
  strategy: Strategy;
  primitive: PrimitiveDoc;
}

export type RunStatus = 'idle' | 'running' | 'done' | 'failed';

export interface SceneSnapshot {
  scene_id: string;
  status: RunStatus;
  error: string | null;
  frames: number;
  base_dataset_size: number;
  inserted: ObjectSpecDoc[];
  queued: ObjectSpecDoc[];
}

export interface IntrinsicsDoc {
  fl_x: number;
  fl_y: number;
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface FrameDoc {
  file_path: string;
  transform_matrix: Mat4;
}

export interface FramesPayload {
  intrinsics: IntrinsicsDoc;
  frames: FrameDoc[];
}

export interface JobStatus {
  status: RunStatus;
  stage: string;
  object_name: string;
  object_index: number;
  total: number;
  fraction: number;
  error: string | null;
}

export interface RunStarted {
  status: string;
  objects: number;
}

export function mat4Equal(a: Mat4, b: Mat4): boolean {
  if (a.length !== 4 || b.length !== 4) return false;
  for (let r = 0; r < 4; r++) {
    if (a[r].length !== 4 || b[r].length !== 4) return false;
    for (let c = 0; c < 4; c++) {
      if (a[r][c] !== b[r][c]) return false;
    }
  }
  return true;
}

/** Exact equality, the contract for a server round-trip of a spec. */
export function specsEqual(a: ObjectSpecDoc, b: ObjectSpecDoc): boolean {
  return (
    a.name === b.name &&
    a.prompt === b.prompt &&
    a.strategy === b.strategy &&
    a.primitive.kind === b.primitive.kind &&
    mat4Equal(a.primitive.transform, b.primitive.transform) &&
    a.primitive.scale.length === 3 &&
    b.primitive.scale.length === 3 &&
    a.primitive.scale.every((s, i) => s === b.primitive.scale[i])
  );
}

export function identityMat4(): Mat4 {
  return [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
  ];
}

export function translationOf(m: Mat4): Vec3 {
  return [m[0][3], m[1][3], m[2][3]];
}
