/**
 * Probe orchestration: load a detector and an image set, wrap the detector
 * in a mutation operator, and export n-run detection records in the
 * analysis engine's line-oriented wire format.
 *
 * The export always includes the unmodified model under the reserved id
 * "original", run the same number of times as every mutant, so the
 * analysis side can use it as the reference stream.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";
import { z } from "zod";

import { ActivationTap, ModelSpec, TinyDetector } from "./model.js";
import { MutantSpec, applyDropBlock, applyDropout, formatModelId } from "./operators.js";
import { KeyedRng } from "./rng.js";
import { WireDetection, recordLine } from "./wire.js";

export const ORIGINAL_MODEL_ID = "original";
export const DEFAULT_SELECTOR = "last:3";

/** Raised for malformed user input (specs, images, selectors, grids). */
export class InputError extends Error {}

export const modelSpecSchema = z.object({
  name: z.string().min(1).default("tiny-det"),
  seed: z.number().int().nonnegative().default(0),
  input_size: z.number().int().multipleOf(8).min(16).max(512).default(64),
  classes: z.number().int().min(1).max(64).default(5),
  score_threshold: z.number().gt(0).lt(1).default(0.5),
});

export function parseModelSpec(raw: unknown): ModelSpec {
  const parsed = modelSpecSchema.safeParse(raw);
  if (!parsed.success) {
    throw new InputError(`bad model spec: ${parsed.error.issues
      .map((i) => `${i.path.join(".") || "(root)"}: ${i.message}`)
      .join("; ")}`);
  }
  return {
    name: parsed.data.name,
    seed: parsed.data.seed,
    inputSize: parsed.data.input_size,
    classes: parsed.data.classes,
    scoreThreshold: parsed.data.score_threshold,
  };
}

export function loadModelSpec(filePath: string): ModelSpec {
  let text: string;
  try {
    text = fs.readFileSync(filePath, "utf8");
  } catch (err) {
    throw new InputError(`cannot read model spec ${filePath}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new InputError(`model spec ${filePath} is not valid JSON: ${(err as Error).message}`);
  }
  return parseModelSpec(raw);
}

/**
 * Decoded input image: flat [height, width, 3] pixel buffer, row-major,
 * channel fastest. Images are resized to the detector's input side at
 * inference time, so sources of any square-ish size load fine.
 */
export interface ProbeImage {
  imageId: string;
  height: number;
  width: number;
  pixels: Float32Array;
}

const imageSchema = z
  .object({
    image_id: z.string().min(1).optional(),
    height: z.number().int().min(8).max(2048),
    width: z.number().int().min(8).max(2048),
    channels: z.literal(3),
    pixels: z.array(z.number()),
  })
  .refine((img) => img.pixels.length === img.height * img.width * img.channels, {
    message: "pixels length must equal height * width * channels",
  });

export function parseImage(raw: unknown, fallbackId: string): ProbeImage {
  const parsed = imageSchema.safeParse(raw);
  if (!parsed.success) {
    throw new InputError(`bad image ${fallbackId}: ${parsed.error.issues
      .map((i) => `${i.path.join(".") || "(root)"}: ${i.message}`)
      .join("; ")}`);
  }
  return {
    imageId: parsed.data.image_id ?? fallbackId,
    height: parsed.data.height,
    width: parsed.data.width,
    pixels: Float32Array.from(parsed.data.pixels),
  };
}

/** Load every *.json image in a directory, sorted by file name. */
export function loadImageDir(dir: string): ProbeImage[] {
  let names: string[];
  try {
    names = fs.readdirSync(dir);
  } catch (err) {
    throw new InputError(`cannot read image directory ${dir}: ${(err as Error).message}`);
  }
  const files = names.filter((n) => n.endsWith(".json")).sort();
  if (files.length === 0) {
    throw new InputError(`no .json images in ${dir}`);
  }
  const images = files.map((name) => {
    const filePath = path.join(dir, name);
    let raw: unknown;
    try {
      raw = JSON.parse(fs.readFileSync(filePath, "utf8"));
    } catch (err) {
      throw new InputError(`image ${filePath} is not valid JSON: ${(err as Error).message}`);
    }
    return parseImage(raw, name.replace(/\.json$/, ""));
  });
  const seen = new Set<string>();
  for (const img of images) {
    if (seen.has(img.imageId)) {
      throw new InputError(`duplicate image id ${img.imageId!} in ${dir}`);
    }
    seen.add(img.imageId);
  }
  return images;
}

/**
 * Resolve a layer selector against the detector's instrumentable layers.
 * Two forms: "last:N" (the N deepest layers, clamped to what exists) and
 * a comma-separated list of exact layer names.
 */
export function resolveSelector(available: string[], selector: string): string[] {
  const trimmed = selector.trim();
  if (trimmed.length === 0) {
    throw new InputError("layer selector is empty");
  }
  const lastForm = /^last:(\d+)$/.exec(trimmed);
  if (lastForm) {
    const n = Number(lastForm[1]);
    if (n < 1) {
      throw new InputError("layer selector must keep at least one layer");
    }
    return available.slice(-n);
  }
  const wanted = trimmed
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
  if (wanted.length === 0) {
    throw new InputError("layer selector resolves to no layers");
  }
  for (const name of wanted) {
    if (!available.includes(name)) {
      throw new InputError(
        `layer selector names unknown layer "${name}" (available: ${available.join(", ")})`,
      );
    }
  }
  return available.filter((name) => wanted.includes(name));
}

export interface InstrumentedModel {
  modelId: string;
  layers: string[];
  run(image: ProbeImage, runIndex: number, scoreThreshold?: number): WireDetection[];
}

/**
 * Wrap a detector in a mutation operator over the selected layers. A null
 * mutant yields the untouched original: no tap is installed at all, so
 * its forward pass is bit-identical to the bare detector's.
 *
 * Masks are keyed by (model id, image id, run, layer), never by call
 * order, so each forward pass samples a fresh mask and any single record
 * can be regenerated in isolation.
 */
export function instrument(
  detector: TinyDetector,
  mutant: MutantSpec | null,
  layers: string[],
): InstrumentedModel {
  if (layers.length === 0) {
    throw new InputError("instrumentation requires at least one layer");
  }
  const known = detector.layerNames();
  for (const layer of layers) {
    if (!known.includes(layer)) {
      throw new InputError(`unknown layer "${layer}" (available: ${known.join(", ")})`);
    }
  }
  if (mutant !== null && mutant.kind === "mcb") {
    const block = mutant.block;
    if (block === undefined || block < 1 || block % 2 === 0) {
      throw new InputError(`dropblock size must be odd and positive, got ${block}`);
    }
  }
  const modelId = mutant === null ? ORIGINAL_MODEL_ID : formatModelId(mutant);
  const selected = new Set(layers);

  const run = (image: ProbeImage, runIndex: number, scoreThreshold?: number) => {
    const tap: ActivationTap | undefined =
      mutant === null
        ? undefined
        : (layer, data, h, w, c) => {
            if (!selected.has(layer)) return false;
            const rng = new KeyedRng(modelId, image.imageId, runIndex, layer);
            if (mutant.kind === "mcd") {
              applyDropout(data, mutant.rate, rng);
            } else {
              applyDropBlock(data, h, w, c, mutant.rate, mutant.block!, rng);
            }
            return true;
          };
    try {
      const head = tf.tidy(() => {
        let input = tf.tensor3d(image.pixels, [image.height, image.width, 3]);
        const side = detector.spec.inputSize;
        if (image.height !== side || image.width !== side) {
          input = tf.image.resizeBilinear(input, [side, side]);
        }
        return detector.forward(input, tap);
      });
      return detector.decode(head, scoreThreshold ?? detector.spec.scoreThreshold);
    } catch (err) {
      throw new Error(
        `inference failed on image "${image.imageId}" (model ${modelId}, run ${runIndex}): ` +
          `${(err as Error).message}`,
      );
    }
  };

  return { modelId, layers: [...layers], run };
}

export interface ExportOptions {
  detector: TinyDetector;
  mutants: MutantSpec[];
  layers: string[];
  images: ProbeImage[];
  runs: number;
  outPath: string;
  scoreThreshold?: number;
}

export interface ExportSummary {
  path: string;
  metaPath: string;
  lineCount: number;
  modelIds: string[];
}

/**
 * Run the original model plus every grid mutant n times over every image
 * and write one wire-format record per (model_id, image, run).
 *
 * Provenance (score threshold, model identity, grid, layer set) goes to a
 * sidecar <out>.meta.json: the record file itself must stay pure JSONL so
 * the analysis engine ingests it without any preamble handling.
 */
export function runExport(opts: ExportOptions): ExportSummary {
  if (!Number.isInteger(opts.runs) || opts.runs < 1) {
    throw new InputError(`runs must be a positive integer, got ${opts.runs}`);
  }
  if (opts.images.length === 0) {
    throw new InputError("no input images");
  }
  if (opts.mutants.length === 0) {
    throw new InputError("mutant grid is empty");
  }
  const threshold = opts.scoreThreshold ?? opts.detector.spec.scoreThreshold;
  const handles = [
    instrument(opts.detector, null, opts.layers),
    ...opts.mutants.map((m) => instrument(opts.detector, m, opts.layers)),
  ];

  const lines: string[] = [];
  for (const handle of handles) {
    for (const image of opts.images) {
      for (let runIndex = 0; runIndex < opts.runs; runIndex++) {
        const detections = handle.run(image, runIndex, threshold);
        lines.push(recordLine(handle.modelId, image.imageId, runIndex, detections));
      }
    }
  }

  fs.writeFileSync(opts.outPath, lines.join("\n") + "\n");
  const metaPath = opts.outPath + ".meta.json";
  const meta = {
    score_threshold: threshold,
    model: { name: opts.detector.spec.name, seed: opts.detector.spec.seed },
    n_runs: opts.runs,
    model_ids: handles.map((h) => h.modelId),
    layers: [...opts.layers],
    images: opts.images.map((i) => i.imageId),
  };
  fs.writeFileSync(metaPath, JSON.stringify(meta, null, 2) + "\n");

  return {
    path: opts.outPath,
    metaPath,
    lineCount: lines.length,
    modelIds: handles.map((h) => h.modelId),
  };
}
