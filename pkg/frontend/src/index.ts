/**
 * Bindings for the masktubes engine.
 *
 * Everything goes through the engine's public contract: the `masktubes`
 * command line and its JSON document schemas. Results are plain objects,
 * field-for-field equal to what the CLI writes, so scripts and notebooks
 * can drive evaluation without re-implementing any metric.
 */
import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface EngineOptions {
  /** Command vector launching the CLI; defaults to `[$MASKTUBES_PYTHON | python3, -m, masktubes]`. */
  command?: string[];
}

export interface EvaluateConfig {
  kValues?: number[];
  thresholds?: number[];
  maskGate?: number;
  corpusWideK?: boolean;
  workers?: number;
}

export interface TrackConfig {
  iouGate?: number;
  maxAge?: number;
  stuffMerge?: boolean;
}

/** A scene-graph document: {video_id, T, H, W, objects, relations}. */
export type GraphDocument = Record<string, unknown>;
/** A mask document: {video_id, frames: [{frame, segments: [...]}]}. */
export type MasksDocument = Record<string, unknown>;

/** A single-file bundle: vocabulary plus per-video graph and mask documents. */
export interface BundleDocument {
  vocabulary: Record<string, unknown>;
  videos: { graph: GraphDocument; masks: MasksDocument }[];
}

export interface RleRoundtrip {
  h: number;
  w: number;
  rle: number[];
  area: number;
  grid: number[][];
}

export class EngineError extends Error {
  constructor(message: string, public readonly exitCode: number | null) {
    super(message);
    this.name = "EngineError";
  }
}

function engineCommand(options?: EngineOptions): string[] {
  if (options?.command && options.command.length > 0) {
    return options.command;
  }
  const python = process.env.MASKTUBES_PYTHON ?? "python3";
  return [python, "-m", "masktubes"];
}

/** Run one CLI invocation; engine errors surface with the engine's own text. */
export function runEngine(
  args: string[],
  options?: EngineOptions,
  input?: string,
): { stdout: string; stderr: string } {
  const [head, ...rest] = engineCommand(options);
  const result = spawnSync(head, [...rest, ...args], {
    input,
    encoding: "utf-8",
    maxBuffer: 1 << 28,
  });
  if (result.error) {
    throw new EngineError(`failed to launch engine: ${result.error.message}`, null);
  }
  if (result.status !== 0) {
    throw new EngineError(
      result.stderr.trim() || `engine exited with status ${result.status}`,
      result.status,
    );
  }
  return { stdout: result.stdout, stderr: result.stderr };
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "masktubes-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Evaluate prediction bundles against ground truth.
 *
 * Documents may be bundle objects or pre-serialized JSON strings following
 * the CLI schema. The returned object is the parsed report JSON exactly as
 * the CLI wrote it.
 */
export function evaluate(
  gtDocument: BundleDocument | string,
  predDocument: BundleDocument | string,
  config?: EvaluateConfig,
  options?: EngineOptions,
): Record<string, unknown> {
  return withTempDir((dir) => {
    const gtPath = join(dir, "gt.json");
    const predPath = join(dir, "pred.json");
    const reportPath = join(dir, "report.json");
    writeFileSync(gtPath, asJsonText(gtDocument));
    writeFileSync(predPath, asJsonText(predDocument));
    const args = ["eval", gtPath, predPath, "--out", reportPath];
    if (config?.kValues) args.push("--k", config.kValues.join(","));
    if (config?.thresholds) args.push("--thresholds", config.thresholds.join(","));
    if (config?.maskGate !== undefined) args.push("--gate", String(config.maskGate));
    if (config?.corpusWideK) args.push("--corpus-wide-k");
    if (config?.workers !== undefined) args.push("--workers", String(config.workers));
    runEngine(args, options);
    return JSON.parse(readFileSync(reportPath, "utf-8"));
  });
}

/**
 * Associate per-frame panoptic segments into tracked tubes.
 *
 * Accepts a mask document or a bundle; returns the tube bundle (scene-graph
 * schema, relations empty) exactly as the CLI wrote it.
 */
export function track(
  framesDocument: MasksDocument | BundleDocument | string,
  config?: TrackConfig,
  options?: EngineOptions,
): BundleDocument {
  return withTempDir((dir) => {
    const inPath = join(dir, "frames.json");
    const outPath = join(dir, "tubes.json");
    writeFileSync(inPath, asJsonText(framesDocument));
    const args = ["track", inPath, "--out", outPath];
    if (config?.iouGate !== undefined) args.push("--iou-gate", String(config.iouGate));
    if (config?.maxAge !== undefined) args.push("--max-age", String(config.maxAge));
    if (config?.stuffMerge === false) args.push("--no-stuff-merge");
    runEngine(args, options);
    return JSON.parse(readFileSync(outPath, "utf-8"));
  });
}

/**
 * Round-trip a bit grid (or an existing run-length mask) through the
 * engine's codec. Returns both the canonical runs and the decoded grid.
 */
export function rleRoundtrip(
  input: (0 | 1 | boolean)[][] | { h: number; w: number; rle: number[] },
  options?: EngineOptions,
): RleRoundtrip {
  const payload = Array.isArray(input)
    ? { grid: input.map((row) => row.map((v) => (v ? 1 : 0))) }
    : input;
  const { stdout } = runEngine(["rle", "-"], options, JSON.stringify(payload));
  return JSON.parse(stdout);
}

function asJsonText(document: unknown): string {
  return typeof document === "string" ? document : JSON.stringify(document);
}

/**
 * Canonical serialization: sorted keys, two-space indent, trailing newline.
 * Two values serialize byte-identically iff they are structurally equal,
 * which is how binding outputs are compared against CLI report files.
 */
export function canonicalStringify(value: unknown): string {
  return writeCanonical(value, "") + "\n";
}

function writeCanonical(value: unknown, indent: string): string {
  if (value === null || typeof value === "boolean") {
    return JSON.stringify(value);
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new Error("non-finite numbers are not representable in canonical JSON");
    }
    return JSON.stringify(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value);
  }
  const inner = indent + "  ";
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => inner + writeCanonical(v, inner));
    return "[\n" + items.join(",\n") + "\n" + indent + "]";
  }
  if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
      a < b ? -1 : a > b ? 1 : 0,
    );
    if (entries.length === 0) return "{}";
    const items = entries.map(
      ([k, v]) => inner + JSON.stringify(k) + ": " + writeCanonical(v, inner),
    );
    return "{\n" + items.join(",\n") + "\n" + indent + "}";
  }
  throw new Error(`cannot canonically serialize a ${typeof value}`);
}
