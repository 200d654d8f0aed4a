/** Decoder for the service's text RLE mask format.
 *
 * Line 1: "WxH"; line 2: comma-separated run lengths over the
 * row-major flattened mask, alternating starting with background.
 * Runs must sum to W*H.
 */

export interface DecodedMask {
  width: number;
  height: number;
  bits: Uint8Array; // row-major, 0/1
}

export class RleFormatError extends Error {}

export function decodeRle(text: string): DecodedMask {
  const lines = text.split("\n");
  if (lines.length < 2) throw new RleFormatError("RLE payload needs a size line and a runs line");
  const sizeMatch = /^(\d+)x(\d+)$/.exec(lines[0].trim());
  if (!sizeMatch) throw new RleFormatError(`bad size line: ${lines[0]}`);
  const width = parseInt(sizeMatch[1], 10);
  const height = parseInt(sizeMatch[2], 10);
  if (width <= 0 || height <= 0) throw new RleFormatError(`bad dimensions ${width}x${height}`);
  const runs = lines[1]
    .trim()
    .split(",")
    .map((r) => {
      const v = Number(r);
      if (!Number.isInteger(v) || v < 0) throw new RleFormatError(`bad run length: ${r}`);
      return v;
    });
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== width * height) {
    throw new RleFormatError(`run lengths sum to ${total}, expected ${width * height}`);
  }
  const bits = new Uint8Array(width * height);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value) bits.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return { width, height, bits };
}

export function maskArea(mask: DecodedMask): number {
  let n = 0;
  for (let i = 0; i < mask.bits.length; i++) n += mask.bits[i];
  return n;
}
