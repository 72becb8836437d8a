import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

export const TRAINER_ROOT = path.resolve(__dirname, "..");
export const TRAINER_CLI = path.join(TRAINER_ROOT, "dist", "cli.js");

export interface RunResult {
  status: number;
  stdout: string;
  stderr: string;
}

function run(command: string, args: string[]): RunResult {
  const out = spawnSync(command, args, {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (out.error) {
    throw out.error;
  }
  return { status: out.status ?? -1, stdout: out.stdout, stderr: out.stderr };
}

/** Run a subcommand of the evaluation pipeline's CLI. */
export function runPipeline(...args: string[]): RunResult {
  return run("python3", ["-m", "cascadekit.cli", ...args]);
}

/** Run a short inline python script against the evaluation package. */
export function runPython(script: string): RunResult {
  return run("python3", ["-c", script]);
}

/** Run the trainer CLI from its built output. */
export function runTrainer(...args: string[]): RunResult {
  return run("node", [TRAINER_CLI, ...args]);
}

export function expectExitZero(result: RunResult, what: string): void {
  if (result.status !== 0) {
    throw new Error(
      `${what} exited with ${result.status}\nstdout:\n${result.stdout}\n` +
        `stderr:\n${result.stderr}`,
    );
  }
}

export function makeTmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function writeJson(file: string, payload: unknown): void {
  fs.writeFileSync(file, JSON.stringify(payload, null, 2) + "\n", "utf-8");
}

/** Generate a deterministic corpus with the evaluation pipeline's CLI. */
export function generateCorpus(
  dir: string,
  seed: number,
  count: number,
  size: string,
): void {
  expectExitZero(
    runPipeline(
      "gen-corpus",
      "--out", dir,
      "--seed", String(seed),
      "--count", String(count),
      "--size", size,
    ),
    "gen-corpus",
  );
}

/** Parse rows of a no-quote CSV file into arrays of fields. */
export function readCsv(file: string): string[][] {
  const lines = fs.readFileSync(file, "utf-8").split(/\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  return lines.map((line) => line.split(","));
}
