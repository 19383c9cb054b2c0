/** Client-side scribble handling: a raw stroke is downsampled uniformly by
 * cumulative path length to at most MAX_SCRIBBLE_POINTS positive points, so
 * the request stays within the shared prompt wire format. */

import type { WirePoint } from "./wire.js";

export const MAX_SCRIBBLE_POINTS = 24;

export function strokeLength(vertices: [number, number][]): number {
  let total = 0;
  for (let i = 1; i < vertices.length; i++) {
    total += Math.hypot(vertices[i][0] - vertices[i - 1][0], vertices[i][1] - vertices[i - 1][1]);
  }
  return total;
}

/** Position at a given arc length along the polyline. */
function pointAt(vertices: [number, number][], target: number): [number, number] {
  let remaining = target;
  for (let i = 1; i < vertices.length; i++) {
    const [ax, ay] = vertices[i - 1];
    const [bx, by] = vertices[i];
    const seg = Math.hypot(bx - ax, by - ay);
    if (remaining <= seg || i === vertices.length - 1) {
      if (seg === 0) return [ax, ay];
      const f = Math.min(remaining / seg, 1);
      return [ax + f * (bx - ax), ay + f * (by - ay)];
    }
    remaining -= seg;
  }
  return vertices[0];
}

export function downsampleStroke(
  vertices: [number, number][],
  maxPoints: number = MAX_SCRIBBLE_POINTS,
): WirePoint[] {
  if (vertices.length === 0) return [];
  const total = strokeLength(vertices);
  if (vertices.length === 1 || total === 0) {
    return [{ x: vertices[0][0], y: vertices[0][1], label: "pos" }];
  }
  const n = Math.max(2, Math.min(maxPoints, vertices.length));
  const points: WirePoint[] = [];
  for (let k = 0; k < n; k++) {
    const [x, y] = pointAt(vertices, (total * k) / (n - 1));
    points.push({ x, y, label: "pos" });
  }
  return points;
}
