/**
 * Deterministic stratified train/config/eval splitting.
 *
 * Positives and negatives are shuffled separately with a seeded PRNG
 * and allocated per split by round-half-up of fraction x class count,
 * with eval absorbing the remainder, so class balance survives even on
 * tiny corpora.  Records keep their manifest order inside each split.
 */

import seedrandom from "seedrandom";

import { FormatError, ImageRecord } from "./formats";

export interface DatasetSplits {
  train: ImageRecord[];
  config: ImageRecord[];
  eval: ImageRecord[];
}

function roundHalfUp(x: number): number {
  return Math.floor(x + 0.5);
}

function shuffled<T>(items: T[], rng: seedrandom.prng): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

export function splitDataset(
  records: ImageRecord[],
  fractions: [number, number, number],
  seed: number,
): DatasetSplits {
  const [fTrain, fConfig, fEval] = fractions;
  if (Math.min(...fractions) <= 0 || Math.abs(fTrain + fConfig + fEval - 1.0) > 1e-9) {
    throw new FormatError("split fractions must be positive and sum to 1");
  }
  if (records.length < 3) {
    throw new FormatError("need at least 3 records to form three splits");
  }
  const rng = seedrandom(`trainer-split:${seed}`);
  const byClass = [0, 1].map((label) =>
    shuffled(records.map((_, i) => i).filter((i) => records[i].label === label), rng),
  );

  const bucketOf = new Array<number>(records.length).fill(2);
  for (const indices of byClass) {
    const n = indices.length;
    const nTrain = Math.min(roundHalfUp(fTrain * n), n);
    const nConfig = Math.min(roundHalfUp(fConfig * n), n - nTrain);
    indices.forEach((recordIdx, k) => {
      bucketOf[recordIdx] = k < nTrain ? 0 : k < nTrain + nConfig ? 1 : 2;
    });
  }

  const splits: DatasetSplits = { train: [], config: [], eval: [] };
  records.forEach((record, i) => {
    const bucket = bucketOf[i];
    (bucket === 0 ? splits.train : bucket === 1 ? splits.config : splits.eval).push(record);
  });
  if (!splits.train.length || !splits.config.length || !splits.eval.length) {
    throw new FormatError(
      `every split must be non-empty, got ${splits.train.length}/` +
        `${splits.config.length}/${splits.eval.length}`,
    );
  }
  return splits;
}
