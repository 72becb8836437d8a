/**
 * Input representations: channel selection/mixing plus bilinear resize.
 *
 * Matches the evaluation pipeline's definition byte for byte: channel
 * reduction first (BT.601 luma rounded to bytes before any resampling),
 * then bilinear interpolation with half-pixel centers and clamped edge
 * samples, then round-half-up back to bytes.  Two models share a
 * representation exactly when their representation keys are equal.
 */

import { ColorMode, FormatError, ImageRecord, TransformSpec } from "./formats";

const GRAY_WEIGHTS = [0.299, 0.587, 0.114];

/** (C, H, W) planes as Float64Array per channel after channel reduction. */
function reduceChannels(record: ImageRecord, mode: ColorMode): Float64Array[] {
  const plane = record.width * record.height;
  const planes: Float64Array[] = [];
  for (let c = 0; c < record.channels; c++) {
    const out = new Float64Array(plane);
    for (let p = 0; p < plane; p++) {
      out[p] = record.pixels[c * plane + p];
    }
    planes.push(out);
  }
  if (record.channels === 1) {
    if (mode === "GRAY") {
      return planes;
    }
    throw new FormatError(
      `image ${record.id} has 1 channel; only GRAY transforms apply`,
    );
  }
  if (record.channels !== 3) {
    throw new FormatError(
      `image ${record.id}: unsupported channel count ${record.channels}`,
    );
  }
  switch (mode) {
    case "FULL_RGB":
      return planes;
    case "RED":
      return [planes[0]];
    case "GREEN":
      return [planes[1]];
    case "BLUE":
      return [planes[2]];
    case "GRAY": {
      const luma = new Float64Array(plane);
      for (let p = 0; p < plane; p++) {
        const v =
          GRAY_WEIGHTS[0] * planes[0][p] +
          GRAY_WEIGHTS[1] * planes[1][p] +
          GRAY_WEIGHTS[2] * planes[2][p];
        luma[p] = Math.floor(v + 0.5);
      }
      return [luma];
    }
  }
}

interface AxisCoords {
  lo: Int32Array;
  hi: Int32Array;
  frac: Float64Array;
}

function axisCoords(outN: number, inN: number): AxisCoords {
  const lo = new Int32Array(outN);
  const hi = new Int32Array(outN);
  const frac = new Float64Array(outN);
  for (let i = 0; i < outN; i++) {
    let src = (i + 0.5) * (inN / outN) - 0.5;
    if (src < 0) src = 0;
    if (src > inN - 1) src = inN - 1;
    const floor = Math.floor(src);
    lo[i] = floor;
    hi[i] = Math.min(floor + 1, inN - 1);
    frac[i] = src - floor;
  }
  return { lo, hi, frac };
}

function bilinear(
  plane: Float64Array,
  inW: number,
  inH: number,
  outW: number,
  outH: number,
): Float64Array {
  const y = axisCoords(outH, inH);
  const x = axisCoords(outW, inW);
  const out = new Float64Array(outW * outH);
  for (let r = 0; r < outH; r++) {
    const rowLo = y.lo[r] * inW;
    const rowHi = y.hi[r] * inW;
    const fy = y.frac[r];
    for (let c = 0; c < outW; c++) {
      const fx = x.frac[c];
      const top = plane[rowLo + x.lo[c]] * (1.0 - fx) + plane[rowLo + x.hi[c]] * fx;
      const bot = plane[rowHi + x.lo[c]] * (1.0 - fx) + plane[rowHi + x.hi[c]] * fx;
      out[r * outW + c] = top * (1.0 - fy) + bot * fy;
    }
  }
  return out;
}

/** Produce the model input as channel-major bytes in [0, 255]. */
export function applyTransform(record: ImageRecord, spec: TransformSpec): Uint8Array {
  if (spec.width <= 0 || spec.height <= 0) {
    throw new FormatError("transform dimensions must be positive");
  }
  const reduced = reduceChannels(record, spec.colorMode);
  const plane = spec.width * spec.height;
  const out = new Uint8Array(reduced.length * plane);
  reduced.forEach((channel, c) => {
    const resized = bilinear(channel, record.width, record.height, spec.width, spec.height);
    for (let p = 0; p < plane; p++) {
      const v = Math.floor(resized[p] + 0.5);
      out[c * plane + p] = v < 0 ? 0 : v > 255 ? 255 : v;
    }
  });
  return out;
}

/** Transformed pixels as normalized floats in [0, 1], channel-major. */
export function transformToFloats(record: ImageRecord, spec: TransformSpec): Float32Array {
  const bytes = applyTransform(record, spec);
  const out = new Float32Array(bytes.length);
  for (let i = 0; i < bytes.length; i++) {
    out[i] = bytes[i] / 255;
  }
  return out;
}
