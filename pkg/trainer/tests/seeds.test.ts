import * as fs from "node:fs";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  expectExitZero,
  generateCorpus,
  makeTmpDir,
  runTrainer,
  writeJson,
} from "./helpers";

// one architecture, the two extreme transforms in each direction
const GRID = {
  splits: [0.5, 0.25, 0.25],
  arch: { conv_layers: [2], conv_nodes: [8], dense_nodes: [16] },
  transforms: {
    sizes: [
      [6, 6],
      [12, 12],
    ],
    modes: ["GRAY", "FULL_RGB"],
  },
  anchor: { enabled: false },
};
const LARGEST_FULL_COLOR = "c2n8d16-12x12-FULL_RGB";
const SMALLEST_SINGLE_CHANNEL = "c2n8d16-6x6-GRAY";
const SEEDS = [301, 302, 303];

const tmp = makeTmpDir("trainer-seeds-");
const corpusDir = path.join(tmp, "corpus");
const gridFile = path.join(tmp, "grid.json");
const accuracies: Record<string, number[]> = {
  [LARGEST_FULL_COLOR]: [],
  [SMALLEST_SINGLE_CHANNEL]: [],
};

beforeAll(() => {
  generateCorpus(corpusDir, 59, 480, "24x24");
  writeJson(gridFile, GRID);
  for (const seed of SEEDS) {
    const outDir = path.join(tmp, `run-${seed}`);
    expectExitZero(
      runTrainer(
        "train-and-score",
        "--dataset-dir", corpusDir,
        "--grid", gridFile,
        "--out", outDir,
        "--seed", String(seed),
        "--epochs", "12",
      ),
      `train-and-score seed ${seed}`,
    );
    const report = JSON.parse(
      fs.readFileSync(path.join(outDir, "training_report.json"), "utf-8"),
    ) as { models: Record<string, { eval_accuracy: number | null; diverged: boolean }> };
    for (const modelId of Object.keys(accuracies)) {
      const entry = report.models[modelId];
      expect(entry, `${modelId} in seed ${seed} report`).toBeDefined();
      expect(entry.diverged, `${modelId} diverged under seed ${seed}`).toBe(false);
      accuracies[modelId].push(entry.eval_accuracy!);
    }
  }
});
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

describe("input fidelity ordering over training seeds", () => {
  it("ranks the largest full-color model at or above the smallest single-channel one", () => {
    const mean = (values: number[]) =>
      values.reduce((a, b) => a + b, 0) / values.length;
    const large = mean(accuracies[LARGEST_FULL_COLOR]);
    const small = mean(accuracies[SMALLEST_SINGLE_CHANNEL]);
    expect(
      large,
      `mean eval accuracy over seeds ${SEEDS.join(", ")}: ` +
        `${LARGEST_FULL_COLOR} ${accuracies[LARGEST_FULL_COLOR].join("/")} vs ` +
        `${SMALLEST_SINGLE_CHANNEL} ${accuracies[SMALLEST_SINGLE_CHANNEL].join("/")}`,
    ).toBeGreaterThanOrEqual(small);
  });
});
