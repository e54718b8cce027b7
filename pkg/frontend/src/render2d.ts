import { worldToCamera } from './camera.js';
import type { Segment } from './frusta.js';
import type { IntrinsicsDoc, Mat4, Vec3 } from './types.js';

// Wireframe projection for the canvas viewport. Segments are clipped at the
// near plane in camera space, then mapped to pixels with the same pinhole
// formula the server uses, so what the user sees matches what the dataset
// cameras see.

const NEAR = 1e-3;

export interface ScreenLine {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

function toPixel(k: IntrinsicsDoc, cam: Vec3): [number, number] {
  return [k.cx + k.fl_x * (cam[0] / -cam[2]), k.cy - k.fl_y * (cam[1] / -cam[2])];
}

/** Clip one world segment at the near plane and project it to pixels. */
export function projectSegment(pose: Mat4, k: IntrinsicsDoc, seg: Segment): ScreenLine | null {
  let a = worldToCamera(pose, seg.a);
  let b = worldToCamera(pose, seg.b);
  const aIn = a[2] < -NEAR;
  const bIn = b[2] < -NEAR;
  if (!aIn && !bIn) return null;
  if (aIn !== bIn) {
    // interpolate to the point where z = -NEAR
    const t = (-NEAR - a[2]) / (b[2] - a[2]);
    const cut: Vec3 = [
      a[0] + t * (b[0] - a[0]),
      a[1] + t * (b[1] - a[1]),
      -NEAR,
    ];
    if (aIn) b = cut;
    else a = cut;
  }
  const [x1, y1] = toPixel(k, a);
  const [x2, y2] = toPixel(k, b);
  return { x1, y1, x2, y2 };
}

export function projectSegments(pose: Mat4, k: IntrinsicsDoc, segments: Segment[]): ScreenLine[] {
  const lines: ScreenLine[] = [];
  for (const seg of segments) {
    const line = projectSegment(pose, k, seg);
    if (line !== null) lines.push(line);
  }
  return lines;
}

/** Stroke a batch of projected lines in one path. */
export function strokeLines(
  ctx: CanvasRenderingContext2D,
  lines: ScreenLine[],
  color: string,
  width = 1,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  for (const line of lines) {
    ctx.moveTo(line.x1, line.y1);
    ctx.lineTo(line.x2, line.y2);
  }
  ctx.stroke();
}
