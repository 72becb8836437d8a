#!/usr/bin/env node
/**
 * Trainer command line: real classifiers in, shared artifacts out.
 *
 * train-and-score trains one small conv net per grid model on a corpus
 * directory and writes score matrices, labels, a model registry, a
 * measured cost profile, and a training report.  fine-tune-anchor adds
 * the anchor column to an existing train-and-score output directory.
 * Exit codes: 0 success, 2 validation failure, 4 artifact read/write
 * failure.  Diagnostics go to stderr only.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { splitDataset } from "./dataset";
import {
  ANCHOR_MODEL_ID,
  anchorModel,
  CostProfile,
  enumerateGridModels,
  FormatError,
  GridConfig,
  ImageRecord,
  loadCorpus,
  ModelEntry,
  readCostProfile,
  readGridConfig,
  readLabelFile,
  readManifest,
  readModelRegistry,
  readScoreMatrix,
  representationKey,
  ScoreMatrix,
  writeCostProfile,
  writeLabelFile,
  writeModelRegistry,
  writeScoreMatrix,
} from "./formats";
import {
  DEFAULT_TRAIN_OPTIONS,
  SplitInputs,
  TrainedScores,
  trainAnchorModel,
  trainGridModel,
  TrainOptions,
} from "./model";
import { measureCostProfile, ProfiledNetwork, ProfileSample } from "./profile";

class ArtifactIOError extends Error {}

interface ModelReportEntry {
  train_s: number;
  final_train_accuracy: number | null;
  eval_accuracy: number | null;
  diverged: boolean;
}

interface TrainingReport {
  dataset: {
    dir: string;
    total_images: number;
    train_images: number;
    config_images: number;
    eval_images: number;
    augmented_train_images: number;
  };
  options: {
    seed: number;
    epochs: number;
    batch_size: number;
    learning_rate: number;
  };
  models: Record<string, ModelReportEntry>;
}

function log(message: string): void {
  process.stderr.write(message + "\n");
}

function requireDir(dir: string): string {
  if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
    throw new FormatError(`input directory not found: ${dir}`);
  }
  return dir;
}

function requireFile(file: string): string {
  if (!fs.existsSync(file) || !fs.statSync(file).isFile()) {
    throw new FormatError(`input file not found: ${file}`);
  }
  return file;
}

function writeJson(file: string, payload: unknown): void {
  try {
    fs.writeFileSync(file, JSON.stringify(payload, null, 2) + "\n", "utf-8");
  } catch (err) {
    throw new ArtifactIOError(`cannot write ${file}: ${err}`);
  }
}

function parseSplitsFlag(raw: string): [number, number, number] {
  const parts = raw.split(",").map(Number);
  if (parts.length !== 3 || parts.some((f) => !Number.isFinite(f) || f <= 0)) {
    throw new FormatError(`bad splits ${raw}; expected three positive fractions`);
  }
  return parts as [number, number, number];
}

function evalAccuracy(scores: Float64Array, records: ImageRecord[]): number {
  let correct = 0;
  records.forEach((r, i) => {
    const predicted = scores[i] >= 0.5 ? 1 : 0;
    if (predicted === r.label) correct++;
  });
  return correct / records.length;
}

function reportEntry(
  result: TrainedScores,
  evalScores: Float64Array,
  evalRecords: ImageRecord[],
): ModelReportEntry {
  return {
    train_s: result.trainSeconds,
    final_train_accuracy: result.diverged ? null : result.finalTrainAccuracy,
    eval_accuracy: result.diverged ? null : evalAccuracy(evalScores, evalRecords),
    diverged: result.diverged,
  };
}

interface CommonFlags {
  epochs: number;
  batchSize: number;
  learningRate: number;
  profileReps: number;
  profileSample: number;
}

function trainOptions(flags: CommonFlags, seed: number): TrainOptions {
  return {
    epochs: flags.epochs,
    batchSize: flags.batchSize,
    learningRate: flags.learningRate,
    seed,
  };
}

function profileSampleOf(
  records: ImageRecord[],
  fileOf: Map<number, string>,
  size: number,
): ProfileSample[] {
  const step = Math.max(1, Math.floor(records.length / size));
  const sample: ProfileSample[] = [];
  for (let i = 0; i < records.length && sample.length < size; i += step) {
    sample.push({ record: records[i], file: fileOf.get(records[i].id)! });
  }
  return sample;
}

async function cmdTrainAndScore(args: {
  datasetDir: string;
  grid: string;
  out: string;
  splits?: string;
  seed?: number;
  flags: CommonFlags;
}): Promise<number> {
  const datasetDir = requireDir(args.datasetDir);
  const rawConfig = JSON.parse(fs.readFileSync(requireFile(args.grid), "utf-8"));
  const config = readGridConfig(args.grid);
  if (args.seed !== undefined) config.seed = args.seed;
  if (args.splits !== undefined) config.splits = parseSplitsFlag(args.splits);

  const manifest = readManifest(datasetDir);
  const records = loadCorpus(datasetDir);
  const fileOf = new Map(manifest.map((e) => [e.id, path.join(datasetDir, e.path)]));
  const splits = splitDataset(records, config.splits, config.seed);
  log(
    `dataset ${datasetDir}: ${records.length} images -> ` +
      `${splits.train.length} train / ${splits.config.length} config / ` +
      `${splits.eval.length} eval`,
  );

  const models = enumerateGridModels(config);
  const splitInputs: SplitInputs[] = [
    { name: "config", records: splits.config },
    { name: "eval", records: splits.eval },
  ];

  const configRows: Float64Array[] = [];
  const evalRows: Float64Array[] = [];
  const networks: ProfiledNetwork[] = [];
  const reportModels: Record<string, ModelReportEntry> = {};
  const options = trainOptions(args.flags, config.seed);
  for (const entry of models) {
    const started = Date.now();
    const { network, result } = await trainGridModel(
      entry,
      splits.train,
      splitInputs,
      { ...options, seed: options.seed + networks.length },
    );
    configRows.push(result.scores.get("config")!);
    evalRows.push(result.scores.get("eval")!);
    networks.push({ entry, network });
    reportModels[entry.modelId] = reportEntry(
      result,
      result.scores.get("eval")!,
      splits.eval,
    );
    log(
      `trained ${entry.modelId} in ${((Date.now() - started) / 1000).toFixed(1)}s` +
        (result.diverged
          ? " (diverged; scored 0.5)"
          : ` (train acc ${result.finalTrainAccuracy.toFixed(3)})`),
    );
  }

  const sample = profileSampleOf(records, fileOf, args.flags.profileSample);
  const profile = measureCostProfile(networks, sample, args.flags.profileReps);
  networks.forEach(({ network }) => network.dispose());

  try {
    fs.mkdirSync(args.out, { recursive: true });
  } catch (err) {
    throw new ArtifactIOError(`cannot create ${args.out}: ${err}`);
  }
  const out = (name: string) => path.join(args.out, name);
  const matrix = (splitName: string, rows: Float64Array[], recs: ImageRecord[]): ScoreMatrix => ({
    splitName,
    modelIds: models.map((m) => m.modelId),
    imageIds: recs.map((r) => r.id),
    scores: rows,
  });
  writeModelRegistry(models, out("models.json"));
  writeScoreMatrix(matrix("config", configRows, splits.config), out("config_scores.csv"));
  writeScoreMatrix(matrix("eval", evalRows, splits.eval), out("eval_scores.csv"));
  writeLabelFile(splits.config, out("config_labels.csv"));
  writeLabelFile(splits.eval, out("eval_labels.csv"));
  writeCostProfile(profile, out("profile.json"));

  const resolvedConfig = { ...rawConfig };
  resolvedConfig.seed = config.seed;
  resolvedConfig.splits = config.splits;
  writeJson(out("grid_config.json"), resolvedConfig);

  const report: TrainingReport = {
    dataset: {
      dir: path.resolve(datasetDir),
      total_images: records.length,
      train_images: splits.train.length,
      config_images: splits.config.length,
      eval_images: splits.eval.length,
      augmented_train_images: 2 * splits.train.length,
    },
    options: {
      seed: config.seed,
      epochs: args.flags.epochs,
      batch_size: args.flags.batchSize,
      learning_rate: args.flags.learningRate,
    },
    models: reportModels,
  };
  writeJson(out("training_report.json"), report);
  log(`wrote ${models.length} model scores and artifacts to ${args.out}`);
  return 0;
}

async function cmdFineTuneAnchor(args: {
  datasetDir: string;
  out: string;
  seed?: number;
  flags: CommonFlags;
}): Promise<number> {
  const datasetDir = requireDir(args.datasetDir);
  const outDir = requireDir(args.out);
  const need = (name: string) => {
    const file = path.join(outDir, name);
    if (!fs.existsSync(file)) {
      throw new FormatError(
        `${file} not found; run train-and-score into ${args.out} first`,
      );
    }
    return file;
  };
  const config: GridConfig = readGridConfig(need("grid_config.json"));
  if (args.seed !== undefined) config.seed = args.seed;
  if (!config.anchor) {
    throw new FormatError("grid config has the anchor disabled");
  }
  const anchor = anchorModel(config);

  const configMatrix = readScoreMatrix(need("config_scores.csv"));
  const evalMatrix = readScoreMatrix(need("eval_scores.csv"));
  const registry = readModelRegistry(need("models.json"));
  const profile = readCostProfile(need("profile.json"));
  const report = JSON.parse(
    fs.readFileSync(need("training_report.json"), "utf-8"),
  ) as TrainingReport;

  const manifest = readManifest(datasetDir);
  const records = loadCorpus(datasetDir);
  const byId = new Map(records.map((r) => [r.id, r]));
  const fileOf = new Map(manifest.map((e) => [e.id, path.join(datasetDir, e.path)]));
  const pickRecords = (ids: number[], splitName: string): ImageRecord[] =>
    ids.map((id) => {
      const r = byId.get(id);
      if (!r) {
        throw new FormatError(
          `${splitName} split references image id ${id} absent from ${datasetDir}`,
        );
      }
      return r;
    });
  const configRecords = pickRecords(configMatrix.imageIds, "config");
  const evalRecords = pickRecords(evalMatrix.imageIds, "eval");
  const held = new Set([...configMatrix.imageIds, ...evalMatrix.imageIds]);
  const trainRecords = records.filter((r) => !held.has(r.id));
  if (!trainRecords.length) {
    throw new FormatError("no training images remain outside config/eval splits");
  }
  log(
    `fine-tuning anchor on ${trainRecords.length} train images ` +
      `(${configRecords.length} config / ${evalRecords.length} eval held out)`,
  );

  const options = trainOptions(args.flags, config.seed);
  const { network, result } = await trainAnchorModel(
    anchor.transform,
    trainRecords,
    [
      { name: "config", records: configRecords },
      { name: "eval", records: evalRecords },
    ],
    options,
  );
  log(
    result.diverged
      ? "anchor training diverged; scored 0.5"
      : `anchor trained in ${result.trainSeconds.toFixed(1)}s ` +
          `(train acc ${result.finalTrainAccuracy.toFixed(3)})`,
  );

  const sample = profileSampleOf(records, fileOf, args.flags.profileSample);
  const anchorProfile = measureCostProfile(
    [{ entry: anchor, network }],
    sample,
    args.flags.profileReps,
  );
  network.dispose();

  const appendRow = (matrix: ScoreMatrix, row: Float64Array): ScoreMatrix => {
    const keep = matrix.modelIds
      .map((id, i) => [id, i] as const)
      .filter(([id]) => id !== ANCHOR_MODEL_ID);
    return {
      splitName: matrix.splitName,
      modelIds: [...keep.map(([id]) => id), ANCHOR_MODEL_ID],
      imageIds: matrix.imageIds,
      scores: [...keep.map(([, i]) => matrix.scores[i]), row],
    };
  };
  writeScoreMatrix(
    appendRow(configMatrix, result.scores.get("config")!),
    path.join(outDir, "config_scores.csv"),
  );
  writeScoreMatrix(
    appendRow(evalMatrix, result.scores.get("eval")!),
    path.join(outDir, "eval_scores.csv"),
  );

  const models: ModelEntry[] = registry.filter((m) => !m.isAnchor);
  models.push(anchor);
  writeModelRegistry(models, path.join(outDir, "models.json"));

  const key = representationKey(anchor.transform);
  const merged: CostProfile = {
    loadFullS: profile.loadFullS,
    loadReprS: { ...profile.loadReprS, [key]: anchorProfile.loadReprS[key] },
    transformS: { ...profile.transformS, [key]: anchorProfile.transformS[key] },
    inferS: { ...profile.inferS, [ANCHOR_MODEL_ID]: anchorProfile.inferS[ANCHOR_MODEL_ID] },
  };
  writeCostProfile(merged, path.join(outDir, "profile.json"));

  report.models[ANCHOR_MODEL_ID] = reportEntry(
    result,
    result.scores.get("eval")!,
    evalRecords,
  );
  writeJson(path.join(outDir, "training_report.json"), report);
  log(`anchor column added to artifacts in ${args.out}`);
  return 0;
}

const USAGE = `usage: cascadekit-trainer <command> [options]

commands:
  train-and-score   train grid models on a corpus and emit artifacts
                    --dataset-dir DIR --grid CONFIG --out DIR
                    [--splits F,F,F] [--seed N] [--epochs N]
                    [--batch-size N] [--learning-rate X]
                    [--profile-sample N] [--profile-reps N]
  fine-tune-anchor  add the anchor column to a train-and-score output
                    --dataset-dir DIR --out DIR [--seed N] [--epochs N]
                    [--batch-size N] [--learning-rate X]
                    [--profile-sample N] [--profile-reps N]
`;

function numberFlag(raw: string | undefined, fallback: number, name: string): number {
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value) || value <= 0) {
    throw new FormatError(`${name} must be a positive number, got ${raw}`);
  }
  return value;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command === undefined || command === "--help" || command === "-h") {
    process.stderr.write(USAGE);
    return command === undefined ? 2 : 0;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: rest,
      options: {
        "dataset-dir": { type: "string" },
        grid: { type: "string" },
        out: { type: "string" },
        splits: { type: "string" },
        seed: { type: "string" },
        epochs: { type: "string" },
        "batch-size": { type: "string" },
        "learning-rate": { type: "string" },
        "profile-sample": { type: "string" },
        "profile-reps": { type: "string" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    log(`validation error: ${(err as Error).message}`);
    return 2;
  }
  const values = parsed.values;

  try {
    const flags: CommonFlags = {
      epochs: Math.round(
        numberFlag(values.epochs, DEFAULT_TRAIN_OPTIONS.epochs, "--epochs"),
      ),
      batchSize: Math.round(
        numberFlag(values["batch-size"], DEFAULT_TRAIN_OPTIONS.batchSize, "--batch-size"),
      ),
      learningRate: numberFlag(
        values["learning-rate"],
        DEFAULT_TRAIN_OPTIONS.learningRate,
        "--learning-rate",
      ),
      profileSample: Math.round(numberFlag(values["profile-sample"], 24, "--profile-sample")),
      profileReps: Math.round(numberFlag(values["profile-reps"], 3, "--profile-reps")),
    };
    const seed = values.seed === undefined ? undefined : Math.round(Number(values.seed));
    if (seed !== undefined && !Number.isFinite(seed)) {
      throw new FormatError(`--seed must be an integer, got ${values.seed}`);
    }
    const required = (flag: "dataset-dir" | "grid" | "out"): string => {
      const v = values[flag];
      if (v === undefined) {
        throw new FormatError(`--${flag} is required`);
      }
      return v;
    };

    if (command === "train-and-score") {
      return await cmdTrainAndScore({
        datasetDir: required("dataset-dir"),
        grid: required("grid"),
        out: required("out"),
        splits: values.splits,
        seed,
        flags,
      });
    }
    if (command === "fine-tune-anchor") {
      return await cmdFineTuneAnchor({
        datasetDir: required("dataset-dir"),
        out: required("out"),
        seed,
        flags,
      });
    }
    log(`validation error: unknown command ${command}`);
    process.stderr.write(USAGE);
    return 2;
  } catch (err) {
    if (err instanceof FormatError) {
      log(`validation error: ${err.message}`);
      return 2;
    }
    if (err instanceof ArtifactIOError) {
      log(`artifact error: ${err.message}`);
      return 4;
    }
    throw err;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then(
    (code) => {
      process.exitCode = code;
    },
    (err) => {
      log(`error: ${err?.stack ?? err}`);
      process.exitCode = 1;
    },
  );
}
