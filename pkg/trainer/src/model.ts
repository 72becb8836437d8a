/**
 * Small real convolutional classifiers over the model grid.
 *
 * Each grid model is a conv net at toy scale: N conv layers, each
 * followed by 2x2 max pooling while the feature map allows it, then a
 * ReLU dense layer and a sigmoid output.  Training doubles the data
 * with left-right flips.  A model whose training loss leaves the finite
 * range is marked diverged and scores every image 0.5 so downstream
 * artifacts stay well-formed.
 */

import * as tf from "@tensorflow/tfjs";
import seedrandom from "seedrandom";

import { ArchSpec, ImageRecord, ModelEntry, TransformSpec } from "./formats";
import { transformToFloats } from "./transforms";

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
}

export const DEFAULT_TRAIN_OPTIONS: Omit<TrainOptions, "seed"> = {
  epochs: 12,
  batchSize: 32,
  learningRate: 0.01,
};

export interface TrainedScores {
  /** Scores aligned with the records passed per split. */
  scores: Map<string, Float64Array>;
  trainSeconds: number;
  finalTrainAccuracy: number;
  diverged: boolean;
}

export interface SplitInputs {
  name: string;
  records: ImageRecord[];
}

function channels(t: TransformSpec): number {
  return t.colorMode === "FULL_RGB" ? 3 : 1;
}

/** Channel-major floats to an NHWC tensor the layers API expects. */
function toNhwcTensor(inputs: Float32Array[], t: TransformSpec): tf.Tensor4D {
  const c = channels(t);
  const plane = t.width * t.height;
  const data = new Float32Array(inputs.length * plane * c);
  inputs.forEach((planes, n) => {
    const base = n * plane * c;
    for (let p = 0; p < plane; p++) {
      for (let ch = 0; ch < c; ch++) {
        data[base + p * c + ch] = planes[ch * plane + p];
      }
    }
  });
  return tf.tensor4d(data, [inputs.length, t.height, t.width, c]);
}

/** Mirror a channel-major image horizontally. */
export function flipLeftRight(planes: Float32Array, t: TransformSpec): Float32Array {
  const out = new Float32Array(planes.length);
  const { width, height } = t;
  for (let ch = 0; ch < channels(t); ch++) {
    const base = ch * width * height;
    for (let r = 0; r < height; r++) {
      for (let col = 0; col < width; col++) {
        out[base + r * width + col] = planes[base + r * width + (width - 1 - col)];
      }
    }
  }
  return out;
}

export function buildGridNetwork(
  arch: ArchSpec,
  t: TransformSpec,
  seed: number,
): tf.LayersModel {
  const model = tf.sequential();
  let [h, w] = [t.height, t.width];
  let nextSeed = seed;
  const init = () => tf.initializers.glorotUniform({ seed: nextSeed++ });
  for (let layer = 0; layer < arch.convLayers; layer++) {
    model.add(
      tf.layers.conv2d({
        inputShape: layer === 0 ? [t.height, t.width, channels(t)] : undefined,
        filters: arch.convNodes,
        kernelSize: 3,
        padding: "same",
        activation: "relu",
        kernelInitializer: init(),
      }),
    );
    if (h >= 2 && w >= 2) {
      model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
      h = Math.floor(h / 2);
      w = Math.floor(w / 2);
    }
  }
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: arch.denseNodes,
      activation: "relu",
      kernelInitializer: init(),
    }),
  );
  model.add(
    tf.layers.dense({ units: 1, activation: "sigmoid", kernelInitializer: init() }),
  );
  return model;
}

function shuffledIndices(n: number, rng: seedrandom.prng): number[] {
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  return idx;
}

function constantScores(splits: SplitInputs[]): Map<string, Float64Array> {
  const scores = new Map<string, Float64Array>();
  for (const split of splits) {
    scores.set(split.name, new Float64Array(split.records.length).fill(0.5));
  }
  return scores;
}

async function fitAndScore(
  network: tf.LayersModel,
  t: TransformSpec,
  trainRecords: ImageRecord[],
  splits: SplitInputs[],
  options: TrainOptions,
): Promise<TrainedScores> {
  const started = process.hrtime.bigint();

  // left-right flips double the training data; labels repeat
  const baseInputs = trainRecords.map((r) => transformToFloats(r, t));
  const inputs = baseInputs.concat(baseInputs.map((p) => flipLeftRight(p, t)));
  const labels = trainRecords.map((r) => r.label);
  const allLabels = labels.concat(labels);

  const rng = seedrandom(`trainer-fit:${options.seed}`);
  const order = shuffledIndices(inputs.length, rng);
  const x = toNhwcTensor(order.map((i) => inputs[i]), t);
  const y = tf.tensor2d(order.map((i) => [allLabels[i]]), [inputs.length, 1]);

  network.compile({
    optimizer: tf.train.adam(options.learningRate),
    loss: "binaryCrossentropy",
    metrics: ["accuracy"],
  });

  let finalLoss = Number.NaN;
  let finalAccuracy = Number.NaN;
  try {
    const history = await network.fit(x, y, {
      epochs: options.epochs,
      batchSize: options.batchSize,
      shuffle: false,
      verbose: 0,
    });
    const losses = history.history.loss as number[];
    const accs = (history.history.acc ?? history.history.accuracy) as number[];
    finalLoss = Number(losses[losses.length - 1]);
    finalAccuracy = Number(accs[accs.length - 1]);
  } finally {
    x.dispose();
    y.dispose();
  }

  const diverged = !Number.isFinite(finalLoss) || !Number.isFinite(finalAccuracy);
  if (diverged) {
    return {
      scores: constantScores(splits),
      trainSeconds: Number(process.hrtime.bigint() - started) / 1e9,
      finalTrainAccuracy: Number.NaN,
      diverged: true,
    };
  }
  const scored = await scoreSplits(network, t, splits);
  if (!scored.ok) {
    finalAccuracy = Number.NaN;
  }
  return {
    scores: scored.scores,
    trainSeconds: Number(process.hrtime.bigint() - started) / 1e9,
    finalTrainAccuracy: finalAccuracy,
    diverged: !scored.ok,
  };
}

/** Score each split; a non-finite prediction falls back to constant 0.5. */
async function scoreSplits(
  network: tf.LayersModel,
  t: TransformSpec,
  splits: SplitInputs[],
): Promise<{ scores: Map<string, Float64Array>; ok: boolean }> {
  const scores = new Map<string, Float64Array>();
  for (const split of splits) {
    const sx = toNhwcTensor(split.records.map((r) => transformToFloats(r, t)), t);
    const pred = network.predict(sx, { batchSize: 256 }) as tf.Tensor;
    const values = await pred.data();
    sx.dispose();
    pred.dispose();
    const row = new Float64Array(split.records.length);
    for (let i = 0; i < values.length; i++) {
      const v = values[i];
      if (!Number.isFinite(v)) {
        return { scores: constantScores(splits), ok: false };
      }
      row[i] = v < 0 ? 0 : v > 1 ? 1 : v;
    }
    scores.set(split.name, row);
  }
  return { scores, ok: true };
}

/**
 * Train one grid model and score the given splits.
 *
 * The returned network is live (needed for inference profiling); the
 * caller disposes it.
 */
export async function trainGridModel(
  entry: ModelEntry,
  trainRecords: ImageRecord[],
  splits: SplitInputs[],
  options: TrainOptions,
): Promise<{ network: tf.LayersModel; result: TrainedScores }> {
  if (!entry.arch) {
    throw new Error(`model ${entry.modelId} has no architecture`);
  }
  const network = buildGridNetwork(entry.arch, entry.transform, options.seed);
  const result = await fitAndScore(network, entry.transform, trainRecords, splits, options);
  return { network, result };
}

/**
 * Fine-tune the anchor: a larger conv backbone pre-trained on the train
 * split, then its classification layer replaced by a fresh 64-node ReLU
 * dense layer and retrained with the backbone frozen.
 */
export async function trainAnchorModel(
  t: TransformSpec,
  trainRecords: ImageRecord[],
  splits: SplitInputs[],
  options: TrainOptions,
): Promise<{ network: tf.LayersModel; result: TrainedScores }> {
  let nextSeed = options.seed ^ 0x5a5a;
  const init = () => tf.initializers.glorotUniform({ seed: nextSeed++ });

  const backbone = tf.sequential();
  const filterCounts = [16, 32, 32];
  let [h, w] = [t.height, t.width];
  filterCounts.forEach((filters, layer) => {
    backbone.add(
      tf.layers.conv2d({
        inputShape: layer === 0 ? [t.height, t.width, channels(t)] : undefined,
        filters,
        kernelSize: 3,
        padding: "same",
        activation: "relu",
        kernelInitializer: init(),
      }),
    );
    if (h >= 2 && w >= 2) {
      backbone.add(tf.layers.maxPooling2d({ poolSize: 2 }));
      h = Math.floor(h / 2);
      w = Math.floor(w / 2);
    }
  });
  backbone.add(tf.layers.flatten());

  // phase 1: pre-train backbone + provisional head end to end
  const pretrain = tf.sequential();
  pretrain.add(backbone);
  pretrain.add(
    tf.layers.dense({ units: 32, activation: "relu", kernelInitializer: init() }),
  );
  pretrain.add(
    tf.layers.dense({ units: 1, activation: "sigmoid", kernelInitializer: init() }),
  );
  const phase1 = await fitAndScore(pretrain, t, trainRecords, [], options);

  // phase 2: freeze the backbone, replace the head with 64-node ReLU
  backbone.trainable = false;
  const network = tf.sequential();
  network.add(backbone);
  const headDense = tf.layers.dense({
    units: 64,
    activation: "relu",
    kernelInitializer: init(),
  });
  const headOut = tf.layers.dense({
    units: 1,
    activation: "sigmoid",
    kernelInitializer: init(),
  });
  network.add(headDense);
  network.add(headOut);
  if (phase1.diverged) {
    return {
      network,
      result: {
        scores: constantScores(splits),
        trainSeconds: phase1.trainSeconds,
        finalTrainAccuracy: Number.NaN,
        diverged: true,
      },
    };
  }

  // The backbone is frozen, so extract its features once and train the
  // replacement head on the cached features instead of re-running the
  // conv stack every epoch.
  const started = process.hrtime.bigint();
  const baseInputs = trainRecords.map((r) => transformToFloats(r, t));
  const inputs = baseInputs.concat(baseInputs.map((p) => flipLeftRight(p, t)));
  const labels = trainRecords.map((r) => r.label);
  const allLabels = labels.concat(labels);
  const rng = seedrandom(`trainer-fit:${options.seed + 1}`);
  const order = shuffledIndices(inputs.length, rng);
  const x = toNhwcTensor(order.map((i) => inputs[i]), t);
  const y = tf.tensor2d(order.map((i) => [allLabels[i]]), [inputs.length, 1]);
  const features = backbone.predict(x, { batchSize: 256 }) as tf.Tensor2D;
  x.dispose();

  const head = tf.sequential();
  head.add(
    tf.layers.dense({
      units: 64,
      activation: "relu",
      inputShape: [features.shape[1]],
      kernelInitializer: init(),
    }),
  );
  head.add(
    tf.layers.dense({ units: 1, activation: "sigmoid", kernelInitializer: init() }),
  );
  head.compile({
    optimizer: tf.train.adam(options.learningRate),
    loss: "binaryCrossentropy",
    metrics: ["accuracy"],
  });
  let finalLoss = Number.NaN;
  let finalAccuracy = Number.NaN;
  try {
    const history = await head.fit(features, y, {
      epochs: Math.max(options.epochs, 12),
      batchSize: options.batchSize,
      shuffle: false,
      verbose: 0,
    });
    const losses = history.history.loss as number[];
    const accs = (history.history.acc ?? history.history.accuracy) as number[];
    finalLoss = Number(losses[losses.length - 1]);
    finalAccuracy = Number(accs[accs.length - 1]);
  } finally {
    features.dispose();
    y.dispose();
  }
  if (!Number.isFinite(finalLoss) || !Number.isFinite(finalAccuracy)) {
    head.dispose();
    return {
      network,
      result: {
        scores: constantScores(splits),
        trainSeconds:
          phase1.trainSeconds + Number(process.hrtime.bigint() - started) / 1e9,
        finalTrainAccuracy: Number.NaN,
        diverged: true,
      },
    };
  }

  headDense.setWeights(head.layers[0].getWeights());
  headOut.setWeights(head.layers[1].getWeights());
  head.dispose();

  const scored = await scoreSplits(network, t, splits);
  const trainSeconds =
    phase1.trainSeconds + Number(process.hrtime.bigint() - started) / 1e9;
  return {
    network,
    result: {
      scores: scored.scores,
      trainSeconds,
      finalTrainAccuracy: scored.ok ? finalAccuracy : Number.NaN,
      diverged: !scored.ok,
    },
  };
}
