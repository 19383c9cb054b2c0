/** Shared prompt wire format understood by the inference service. */

export type PointLabel = "pos" | "neg";

export interface WirePoint {
  x: number;
  y: number;
  label: PointLabel;
}

export type WireBox = [number, number, number, number];

export interface WirePrompt {
  points: WirePoint[];
  box: WireBox | null;
  scribble: [number, number][] | null;
}

export function emptyPrompt(): WirePrompt {
  return { points: [], box: null, scribble: null };
}

export function promptIsEmpty(p: WirePrompt): boolean {
  return p.points.length === 0 && p.box === null && p.scribble === null;
}
