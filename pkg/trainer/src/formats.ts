/**
 * Readers and writers for the artifact formats shared with cascadekit.
 *
 * The trainer only talks to the evaluation pipeline through files: score
 * matrices and label sidecars as plain CSV, model registries and cost
 * profiles as JSON, corpora as binary PPM/PGM images under a JSON
 * manifest.  Everything here mirrors the byte-level conventions of the
 * Python implementations (LF line endings, UTF-8, shortest float text
 * that round-trips).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export type ColorMode = "FULL_RGB" | "RED" | "GREEN" | "BLUE" | "GRAY";

export const COLOR_MODES: readonly ColorMode[] = [
  "FULL_RGB",
  "RED",
  "GREEN",
  "BLUE",
  "GRAY",
];

export interface TransformSpec {
  width: number;
  height: number;
  colorMode: ColorMode;
}

export interface ArchSpec {
  convLayers: number;
  convNodes: number;
  denseNodes: number;
}

export interface ModelEntry {
  modelId: string;
  arch: ArchSpec | null;
  transform: TransformSpec;
  isAnchor: boolean;
}

export class FormatError extends Error {}

export function representationKey(t: TransformSpec): string {
  return `${t.width}x${t.height}:${t.colorMode}`;
}

export function inputValueCount(t: TransformSpec): number {
  const channels = t.colorMode === "FULL_RGB" ? 3 : 1;
  return t.width * t.height * channels;
}

/** Shortest decimal text that parses back to the same double. */
export function floatText(x: number): string {
  if (!Number.isFinite(x)) {
    throw new FormatError(`cannot serialize non-finite value ${x}`);
  }
  return String(x);
}

// ---------------------------------------------------------------------------
// corpus manifest and PNM images

export interface ImageRecord {
  id: number;
  width: number;
  height: number;
  channels: number;
  /** Channel-major planes: all of channel 0, then 1, then 2. */
  pixels: Uint8Array;
  label: number;
}

export interface ManifestEntry {
  id: number;
  path: string;
  label: number;
}

/** Parse manifest.json without decoding any images. */
export function readManifest(dir: string): ManifestEntry[] {
  const manifestPath = path.join(dir, "manifest.json");
  let entries: unknown;
  try {
    entries = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  } catch (err) {
    throw new FormatError(`cannot read manifest ${manifestPath}: ${err}`);
  }
  if (!Array.isArray(entries)) {
    throw new FormatError(`manifest ${manifestPath} must be a JSON array`);
  }
  const seen = new Set<number>();
  return entries.map((raw, k) => {
    const entry = raw as ManifestEntry;
    if (
      typeof entry !== "object" || entry === null ||
      !Number.isInteger(entry.id) || typeof entry.path !== "string" ||
      (entry.label !== 0 && entry.label !== 1)
    ) {
      throw new FormatError(`manifest entry ${k} must have id, path, label`);
    }
    if (seen.has(entry.id)) {
      throw new FormatError(`manifest entry ${k}: duplicate image id ${entry.id}`);
    }
    seen.add(entry.id);
    return { id: entry.id, path: entry.path, label: entry.label };
  });
}

function parsePnm(data: Buffer, file: string): {
  channels: number;
  width: number;
  height: number;
  raster: Uint8Array;
} {
  const magic = data.subarray(0, 2).toString("latin1");
  if (magic !== "P5" && magic !== "P6") {
    throw new FormatError(`${file}: not a binary PGM/PPM file`);
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    if (pos >= data.length) {
      throw new FormatError(`${file}: truncated header`);
    }
    const c = data[pos];
    if (c === 0x23) {
      // '#' comment runs to end of line
      const nl = data.indexOf(0x0a, pos);
      pos = nl < 0 ? data.length : nl + 1;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d || c === 0x0b || c === 0x0c) {
      pos += 1;
    } else if (c >= 0x30 && c <= 0x39) {
      let value = 0;
      while (pos < data.length && data[pos] >= 0x30 && data[pos] <= 0x39) {
        value = value * 10 + (data[pos] - 0x30);
        pos += 1;
      }
      fields.push(value);
    } else {
      throw new FormatError(`${file}: bad header byte 0x${c.toString(16)}`);
    }
  }
  const [width, height, maxval] = fields;
  if (maxval !== 255) {
    throw new FormatError(`${file}: maxval must be 255, got ${maxval}`);
  }
  if (width <= 0 || height <= 0) {
    throw new FormatError(`${file}: non-positive dimensions`);
  }
  const channels = magic === "P6" ? 3 : 1;
  const expected = width * height * channels;
  const raster = data.subarray(pos + 1, pos + 1 + expected);
  if (raster.length !== expected) {
    throw new FormatError(
      `${file}: raster has ${raster.length} bytes, expected ${expected}`,
    );
  }
  return { channels, width, height, raster: new Uint8Array(raster) };
}

/** Read one PPM/PGM file into channel-major planes. */
export function readImageFile(file: string, id: number, label: number): ImageRecord {
  const { channels, width, height, raster } = parsePnm(fs.readFileSync(file), file);
  let pixels: Uint8Array;
  if (channels === 1) {
    pixels = raster;
  } else {
    // interleaved RGB raster to planar
    pixels = new Uint8Array(raster.length);
    const plane = width * height;
    for (let p = 0; p < plane; p++) {
      pixels[p] = raster[3 * p];
      pixels[plane + p] = raster[3 * p + 1];
      pixels[2 * plane + p] = raster[3 * p + 2];
    }
  }
  return { id, width, height, channels, pixels, label };
}

/** Load a corpus directory through its manifest.json. */
export function loadCorpus(dir: string): ImageRecord[] {
  return readManifest(dir).map((entry) =>
    readImageFile(path.join(dir, entry.path), entry.id, entry.label),
  );
}

// ---------------------------------------------------------------------------
// score matrices

export interface ScoreMatrix {
  splitName: string;
  modelIds: string[];
  imageIds: number[];
  /** Row-major [model][image]. */
  scores: Float64Array[];
}

export function writeScoreMatrix(matrix: ScoreMatrix, file: string): void {
  const n = matrix.imageIds.length;
  const lines: string[] = [`split,${matrix.splitName}`];
  lines.push(matrix.imageIds.join(","));
  matrix.modelIds.forEach((modelId, i) => {
    const row = matrix.scores[i];
    if (row.length !== n) {
      throw new FormatError(
        `model ${modelId}: row has ${row.length} scores, expected ${n}`,
      );
    }
    const cells: string[] = new Array(n);
    for (let j = 0; j < n; j++) {
      const v = row[j];
      if (!(v >= 0 && v <= 1)) {
        throw new FormatError(
          `model ${modelId}, image ${matrix.imageIds[j]}: score ${v} outside [0, 1]`,
        );
      }
      cells[j] = floatText(v);
    }
    lines.push(n > 0 ? `${modelId},${cells.join(",")}` : modelId);
  });
  fs.writeFileSync(file, lines.join("\n") + "\n", "utf-8");
}

export function readScoreMatrix(file: string): ScoreMatrix {
  const lines = fs.readFileSync(file, "utf-8").split(/\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  if (lines.length < 2 || !lines[0].startsWith("split,")) {
    throw new FormatError(`${file}: expected a split line and an image-id line`);
  }
  const splitName = lines[0].slice("split,".length);
  const imageIds = lines[1] === "" ? [] : lines[1].split(",").map((tok) => {
    const v = Number(tok);
    if (!Number.isInteger(v)) {
      throw new FormatError(`${file}, line 2: image ids must be integers`);
    }
    return v;
  });
  const modelIds: string[] = [];
  const scores: Float64Array[] = [];
  for (let k = 2; k < lines.length; k++) {
    if (lines[k] === "") continue;
    const parts = lines[k].split(",");
    if (parts.length !== imageIds.length + 1) {
      throw new FormatError(
        `${file}, line ${k + 1}: expected ${imageIds.length} scores, found ${parts.length - 1}`,
      );
    }
    modelIds.push(parts[0]);
    const row = new Float64Array(imageIds.length);
    for (let j = 1; j < parts.length; j++) {
      const v = Number(parts[j]);
      if (!Number.isFinite(v) || v < 0 || v > 1) {
        throw new FormatError(
          `${file}, line ${k + 1}, score column ${j}: bad value ${parts[j]!}`,
        );
      }
      row[j - 1] = v;
    }
    scores.push(row);
  }
  return { splitName, modelIds, imageIds, scores };
}

// ---------------------------------------------------------------------------
// label sidecars

export function writeLabelFile(records: { id: number; label: number }[], file: string): void {
  const lines = ["image_id,label"];
  for (const r of records) {
    lines.push(`${r.id},${r.label}`);
  }
  fs.writeFileSync(file, lines.join("\n") + "\n", "utf-8");
}

export function readLabelFile(file: string): Map<number, number> {
  const lines = fs.readFileSync(file, "utf-8").split(/\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  if (lines.length === 0 || lines[0] !== "image_id,label") {
    throw new FormatError(`${file}: first line must be 'image_id,label'`);
  }
  const labels = new Map<number, number>();
  for (let k = 1; k < lines.length; k++) {
    const parts = lines[k].split(",");
    const id = Number(parts[0]);
    const label = Number(parts[1]);
    if (parts.length !== 2 || !Number.isInteger(id) || (label !== 0 && label !== 1)) {
      throw new FormatError(`${file} line ${k + 1}: expected 'id,label' with label 0 or 1`);
    }
    if (labels.has(id)) {
      throw new FormatError(`${file} line ${k + 1}: duplicate image id ${id}`);
    }
    labels.set(id, label);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// model registry

export function writeModelRegistry(models: ModelEntry[], file: string): void {
  const entries = models.map((m) => ({
    model_id: m.modelId,
    conv_layers: m.arch ? m.arch.convLayers : null,
    conv_nodes: m.arch ? m.arch.convNodes : null,
    dense_nodes: m.arch ? m.arch.denseNodes : null,
    width: m.transform.width,
    height: m.transform.height,
    color_mode: m.transform.colorMode,
    is_anchor: m.isAnchor,
  }));
  fs.writeFileSync(file, JSON.stringify(entries, null, 2) + "\n", "utf-8");
}

export function readModelRegistry(file: string): ModelEntry[] {
  let entries: unknown;
  try {
    entries = JSON.parse(fs.readFileSync(file, "utf-8"));
  } catch (err) {
    throw new FormatError(`cannot read model registry ${file}: ${err}`);
  }
  if (!Array.isArray(entries)) {
    throw new FormatError(`model registry ${file} must be a JSON array`);
  }
  return entries.map((raw, k) => {
    const e = raw as Record<string, unknown>;
    const mode = e.color_mode as ColorMode;
    if (!COLOR_MODES.includes(mode)) {
      throw new FormatError(`model registry ${file}, entry ${k}: bad color mode`);
    }
    const isAnchor = Boolean(e.is_anchor);
    const arch = isAnchor
      ? null
      : {
          convLayers: Number(e.conv_layers),
          convNodes: Number(e.conv_nodes),
          denseNodes: Number(e.dense_nodes),
        };
    return {
      modelId: String(e.model_id),
      arch,
      transform: {
        width: Number(e.width),
        height: Number(e.height),
        colorMode: mode,
      },
      isAnchor,
    };
  });
}

// ---------------------------------------------------------------------------
// cost profiles

export interface CostProfile {
  loadFullS: number;
  loadReprS: Record<string, number>;
  transformS: Record<string, number>;
  inferS: Record<string, number>;
}

function checkNonNegative(name: string, value: number): number {
  if (!Number.isFinite(value) || value < 0) {
    throw new FormatError(`cost profile ${name} must be a non-negative number`);
  }
  return value;
}

export function writeCostProfile(profile: CostProfile, file: string): void {
  checkNonNegative("load_full_s", profile.loadFullS);
  for (const [k, v] of Object.entries(profile.loadReprS)) checkNonNegative(`load_repr_s[${k}]`, v);
  for (const [k, v] of Object.entries(profile.transformS)) checkNonNegative(`transform_s[${k}]`, v);
  for (const [k, v] of Object.entries(profile.inferS)) checkNonNegative(`infer_s[${k}]`, v);
  const sorted = (obj: Record<string, number>) =>
    Object.fromEntries(Object.entries(obj).sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)));
  const payload = {
    infer_s: sorted(profile.inferS),
    load_full_s: profile.loadFullS,
    load_repr_s: sorted(profile.loadReprS),
    transform_s: sorted(profile.transformS),
  };
  fs.writeFileSync(file, JSON.stringify(payload, null, 2) + "\n", "utf-8");
}

export function readCostProfile(file: string): CostProfile {
  let payload: Record<string, unknown>;
  try {
    payload = JSON.parse(fs.readFileSync(file, "utf-8"));
  } catch (err) {
    throw new FormatError(`cannot read cost profile ${file}: ${err}`);
  }
  const numberMap = (raw: unknown, name: string): Record<string, number> => {
    if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
      throw new FormatError(`cost profile ${file}: ${name} must be an object`);
    }
    const out: Record<string, number> = {};
    for (const [k, v] of Object.entries(raw)) {
      out[k] = checkNonNegative(`${name}[${k}]`, Number(v));
    }
    return out;
  };
  return {
    loadFullS: checkNonNegative("load_full_s", Number(payload.load_full_s)),
    loadReprS: numberMap(payload.load_repr_s, "load_repr_s"),
    transformS: numberMap(payload.transform_s, "transform_s"),
    inferS: numberMap(payload.infer_s, "infer_s"),
  };
}

// ---------------------------------------------------------------------------
// grid configuration

export interface GridConfig {
  convLayers: number[];
  convNodes: number[];
  denseNodes: number[];
  sizes: [number, number][];
  modes: ColorMode[];
  anchor: boolean;
  anchorSize: [number, number];
  anchorMode: ColorMode;
  seed: number;
  splits: [number, number, number];
}

export const DEFAULT_GRID_CONFIG: GridConfig = {
  convLayers: [1, 2, 4],
  convNodes: [16, 32],
  denseNodes: [16, 32, 64],
  sizes: [
    [30, 30],
    [60, 60],
    [120, 120],
    [224, 224],
  ],
  modes: [...COLOR_MODES],
  anchor: true,
  anchorSize: [224, 224],
  anchorMode: "FULL_RGB",
  seed: 7,
  splits: [0.5, 0.25, 0.25],
};

function intList(raw: unknown, name: string): number[] {
  if (!Array.isArray(raw) || raw.some((v) => !Number.isInteger(Number(v)))) {
    throw new FormatError(`grid config: ${name} must be a list of integers`);
  }
  return raw.map(Number);
}

/** Parse the shared grid-config JSON, filling unset fields from defaults. */
export function parseGridConfig(raw: Record<string, unknown>): GridConfig {
  const config: GridConfig = JSON.parse(JSON.stringify(DEFAULT_GRID_CONFIG));
  if ("seed" in raw) config.seed = Number(raw.seed);
  if ("splits" in raw) {
    const parts = (raw.splits as unknown[]).map(Number);
    if (parts.length !== 3 || parts.some((f) => !(f > 0))) {
      throw new FormatError("grid config: splits must be three positive fractions");
    }
    config.splits = parts as [number, number, number];
  }
  const arch = (raw.arch ?? {}) as Record<string, unknown>;
  if ("conv_layers" in arch) config.convLayers = intList(arch.conv_layers, "arch.conv_layers");
  if ("conv_nodes" in arch) config.convNodes = intList(arch.conv_nodes, "arch.conv_nodes");
  if ("dense_nodes" in arch) config.denseNodes = intList(arch.dense_nodes, "arch.dense_nodes");
  const transforms = (raw.transforms ?? {}) as Record<string, unknown>;
  if ("sizes" in transforms) {
    config.sizes = (transforms.sizes as unknown[]).map((pair) => {
      const [w, h] = (pair as unknown[]).map(Number);
      if (!Number.isInteger(w) || !Number.isInteger(h) || w <= 0 || h <= 0) {
        throw new FormatError("grid config: transforms.sizes entries must be [width, height]");
      }
      return [w, h] as [number, number];
    });
  }
  if ("modes" in transforms) {
    config.modes = (transforms.modes as unknown[]).map((m) => {
      if (!COLOR_MODES.includes(m as ColorMode)) {
        throw new FormatError(`grid config: unknown color mode ${m}`);
      }
      return m as ColorMode;
    });
  }
  const anchor = (raw.anchor ?? {}) as Record<string, unknown>;
  if ("enabled" in anchor) config.anchor = Boolean(anchor.enabled);
  if ("width" in anchor && "height" in anchor) {
    config.anchorSize = [Number(anchor.width), Number(anchor.height)];
  }
  if ("mode" in anchor) {
    if (!COLOR_MODES.includes(anchor.mode as ColorMode)) {
      throw new FormatError(`grid config: unknown anchor mode ${anchor.mode}`);
    }
    config.anchorMode = anchor.mode as ColorMode;
  }
  return config;
}

export function readGridConfig(file: string): GridConfig {
  let raw: unknown;
  try {
    raw = JSON.parse(fs.readFileSync(file, "utf-8"));
  } catch (err) {
    throw new FormatError(`cannot read grid config ${file}: ${err}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new FormatError(`grid config ${file} must be a JSON object`);
  }
  return parseGridConfig(raw as Record<string, unknown>);
}

export const ANCHOR_MODEL_ID = "anchor";

export function gridModelId(arch: ArchSpec, t: TransformSpec): string {
  return (
    `c${arch.convLayers}n${arch.convNodes}d${arch.denseNodes}` +
    `-${t.width}x${t.height}-${t.colorMode}`
  );
}

/** All arch x transform pairings, architecture-major; no anchor entry. */
export function enumerateGridModels(config: GridConfig): ModelEntry[] {
  const archs: ArchSpec[] = [];
  for (const convLayers of config.convLayers) {
    for (const convNodes of config.convNodes) {
      for (const denseNodes of config.denseNodes) {
        archs.push({ convLayers, convNodes, denseNodes });
      }
    }
  }
  const transforms: TransformSpec[] = [];
  for (const [width, height] of config.sizes) {
    for (const colorMode of config.modes) {
      transforms.push({ width, height, colorMode });
    }
  }
  const models: ModelEntry[] = [];
  for (const arch of archs) {
    for (const transform of transforms) {
      models.push({
        modelId: gridModelId(arch, transform),
        arch,
        transform,
        isAnchor: false,
      });
    }
  }
  const ids = new Set(models.map((m) => m.modelId));
  if (ids.size !== models.length) {
    throw new FormatError("duplicate model ids in grid");
  }
  return models;
}

export function anchorModel(config: GridConfig): ModelEntry {
  return {
    modelId: ANCHOR_MODEL_ID,
    arch: null,
    transform: {
      width: config.anchorSize[0],
      height: config.anchorSize[1],
      colorMode: config.anchorMode,
    },
    isAnchor: true,
  };
}
