/** Pure overlay rendering: mask -> RGBA buffer (no canvas dependency,
 * so tests can count pixels without a 2D context). */

import type { Branch } from "./api.js";
import type { DecodedMask } from "./rle.js";

export const BRANCH_COLORS: Record<Branch, [number, number, number]> = {
  sam: [66, 133, 244], // blue
  hq: [255, 171, 0], // amber
  corrected: [52, 199, 89], // green
};

export interface OverlayBuffer {
  width: number;
  height: number;
  rgba: Uint8ClampedArray;
  filledPixels: number;
}

/** Semi-transparent fill plus an opaque one-pixel contour outline. */
export function maskToOverlay(
  mask: DecodedMask,
  color: [number, number, number],
  fillAlpha = 0.4,
): OverlayBuffer {
  const { width: w, height: h, bits } = mask;
  const rgba = new Uint8ClampedArray(w * h * 4);
  const fillA = Math.round(255 * fillAlpha);
  let filled = 0;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const i = y * w + x;
      if (!bits[i]) continue;
      filled += 1;
      const onContour =
        x === 0 ||
        y === 0 ||
        x === w - 1 ||
        y === h - 1 ||
        !bits[i - 1] ||
        !bits[i + 1] ||
        !bits[i - w] ||
        !bits[i + w];
      const o = i * 4;
      rgba[o] = color[0];
      rgba[o + 1] = color[1];
      rgba[o + 2] = color[2];
      rgba[o + 3] = onContour ? 255 : fillA;
    }
  }
  return { width: w, height: h, rgba, filledPixels: filled };
}

export function contourPixelCount(buf: OverlayBuffer): number {
  let n = 0;
  for (let i = 3; i < buf.rgba.length; i += 4) if (buf.rgba[i] === 255) n += 1;
  return n;
}
