/** Canvas-to-model coordinate mapping via letterboxing. */

export interface LetterboxTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
  imageSize: number;
}

export function computeLetterbox(canvasW: number, canvasH: number, imageSize: number): LetterboxTransform {
  const scale = Math.min(canvasW / imageSize, canvasH / imageSize);
  return {
    scale,
    offsetX: (canvasW - imageSize * scale) / 2,
    offsetY: (canvasH - imageSize * scale) / 2,
    imageSize,
  };
}

/** Canvas pixel -> model image coordinates, or null when outside the image. */
export function canvasToImage(
  t: LetterboxTransform,
  cx: number,
  cy: number,
): { x: number; y: number } | null {
  const x = (cx - t.offsetX) / t.scale;
  const y = (cy - t.offsetY) / t.scale;
  if (x < 0 || y < 0 || x >= t.imageSize || y >= t.imageSize) return null;
  return { x, y };
}

export function imageToCanvas(t: LetterboxTransform, x: number, y: number): { x: number; y: number } {
  return { x: t.offsetX + x * t.scale, y: t.offsetY + y * t.scale };
}
