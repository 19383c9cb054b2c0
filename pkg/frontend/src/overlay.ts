/** Overlay rendering: the decoded server matte becomes an RGBA buffer via
 * plain alpha blending -- no other client-side mask math. */

import type { DecodedMatte } from "./png16.js";

export interface OverlayColor {
  r: number;
  g: number;
  b: number;
}

export const DEFAULT_OVERLAY_COLOR: OverlayColor = { r: 66, g: 133, b: 244 };

export function matteToRgba(
  matte: DecodedMatte,
  opacity: number,
  color: OverlayColor = DEFAULT_OVERLAY_COLOR,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(matte.width * matte.height * 4);
  for (let i = 0; i < matte.alpha.length; i++) {
    out[4 * i] = color.r;
    out[4 * i + 1] = color.g;
    out[4 * i + 2] = color.b;
    out[4 * i + 3] = Math.round(matte.alpha[i] * opacity * 255);
  }
  return out;
}
