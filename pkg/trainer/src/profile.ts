/**
 * Measured cost profile: wall-clock medians for load, transform, and
 * per-model inference.
 *
 * Single-threaded on purpose so timings are not distorted by
 * contention.  Each quantity is the median over repetitions of the
 * average per-image time across the sample.  Inference is timed one
 * image at a time (batch size 1) because the evaluation pipeline
 * charges costs per image.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import {
  CostProfile,
  ImageRecord,
  ModelEntry,
  readImageFile,
  representationKey,
  TransformSpec,
} from "./formats";
import { applyTransform, transformToFloats } from "./transforms";

export interface ProfiledNetwork {
  entry: ModelEntry;
  network: tf.LayersModel;
}

export interface ProfileSample {
  record: ImageRecord;
  /** Absolute path of the stored image, for load timing. */
  file: string;
}

function medianOf(fn: () => void, perImages: number, repetitions: number): number {
  const times: number[] = [];
  for (let rep = 0; rep < repetitions; rep++) {
    const start = process.hrtime.bigint();
    fn();
    const elapsed = Number(process.hrtime.bigint() - start) / 1e9;
    times.push(elapsed / perImages);
  }
  times.sort((a, b) => a - b);
  return times[Math.floor(times.length / 2)];
}

function toSingleTensor(record: ImageRecord, t: TransformSpec): tf.Tensor4D {
  const c = t.colorMode === "FULL_RGB" ? 3 : 1;
  const plane = t.width * t.height;
  const planes = transformToFloats(record, t);
  const data = new Float32Array(plane * c);
  for (let p = 0; p < plane; p++) {
    for (let ch = 0; ch < c; ch++) {
      data[p * c + ch] = planes[ch * plane + p];
    }
  }
  return tf.tensor4d(data, [1, t.height, t.width, c]);
}

/**
 * Measure a cost profile over the given sample.
 *
 * repr keys cover every distinct transform among the models; infer
 * times cover every model.  Representation loads are timed against
 * serialized representations in a scratch directory; full loads decode
 * the sample's own image files.
 */
export function measureCostProfile(
  networks: ProfiledNetwork[],
  sample: ProfileSample[],
  repetitions = 3,
): CostProfile {
  if (!sample.length) {
    throw new Error("profiling needs a non-empty sample");
  }
  if (repetitions < 3) {
    throw new Error("repetitions must be >= 3");
  }
  const byRepr = new Map<string, TransformSpec>();
  for (const { entry } of networks) {
    const key = representationKey(entry.transform);
    if (!byRepr.has(key)) {
      byRepr.set(key, entry.transform);
    }
  }
  const n = sample.length;

  const transformS: Record<string, number> = {};
  for (const [key, spec] of byRepr) {
    transformS[key] = medianOf(
      () => sample.forEach((s) => applyTransform(s.record, spec)),
      n,
      repetitions,
    );
  }

  const loadReprS: Record<string, number> = {};
  const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "trainer-profile-"));
  try {
    for (const [key, spec] of byRepr) {
      const paths = sample.map((s, i) => {
        const file = path.join(scratch, `${key.replace(":", "_")}_${i}.bin`);
        fs.writeFileSync(file, applyTransform(s.record, spec));
        return file;
      });
      loadReprS[key] = medianOf(
        () => paths.forEach((p) => fs.readFileSync(p)),
        n,
        repetitions,
      );
    }
  } finally {
    fs.rmSync(scratch, { recursive: true, force: true });
  }

  const loadFullS = medianOf(
    () => sample.forEach((s) => readImageFile(s.file, s.record.id, s.record.label)),
    n,
    repetitions,
  );

  const inferS: Record<string, number> = {};
  for (const { entry, network } of networks) {
    const inputs = sample.map((s) => toSingleTensor(s.record, entry.transform));
    // first call compiles kernels; keep it out of the timed span
    const warm = network.predict(inputs[0]) as tf.Tensor;
    warm.dataSync();
    warm.dispose();
    inferS[entry.modelId] = medianOf(
      () => {
        for (const input of inputs) {
          const out = network.predict(input) as tf.Tensor;
          out.dataSync();
          out.dispose();
        }
      },
      n,
      repetitions,
    );
    inputs.forEach((t) => t.dispose());
  }

  return { loadFullS, loadReprS, transformS, inferS };
}
