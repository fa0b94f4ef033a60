#!/usr/bin/env node
/**
 * Command-line entry point.
 *
 * Exit codes mirror the analysis engine's CLI: 0 success, 1 internal
 * failure, 2 malformed input (arguments, spec files, images, grids).
 */

import { pathToFileURL } from "node:url";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { TinyDetector } from "./model.js";
import { parseGrid } from "./operators.js";
import {
  DEFAULT_SELECTOR,
  InputError,
  loadImageDir,
  loadModelSpec,
  resolveSelector,
  runExport,
} from "./probe.js";

export const EXIT_OK = 0;
export const EXIT_INTERNAL = 1;
export const EXIT_INVALID = 2;

interface CliArgs {
  model: string;
  images: string;
  grid: string;
  runs: number;
  out: string;
  selector: string;
  threshold?: number;
}

function buildParser() {
  return yargs()
    .scriptName("probe")
    .usage("$0 --model spec.json --images dir/ --grid mcd:0.25 --runs 5 --out records.jsonl")
    .option("model", {
      type: "string",
      demandOption: true,
      describe: "detector spec (JSON file)",
    })
    .option("images", {
      type: "string",
      demandOption: true,
      describe: "directory of *.json image tensors",
    })
    .option("grid", {
      type: "string",
      demandOption: true,
      describe: "comma-separated mutant ids, e.g. mcd:0.25,mcb:0.30x5",
    })
    .option("runs", {
      type: "number",
      demandOption: true,
      describe: "forward passes per model per image",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output record file (one JSON object per line)",
    })
    .option("selector", {
      type: "string",
      default: DEFAULT_SELECTOR,
      describe: 'instrumented layers: "last:N" or comma-separated layer names',
    })
    .option("threshold", {
      type: "number",
      describe: "detection score threshold override (default: model spec value)",
    })
    .strict()
    .help();
}

export function main(argv: string[]): number {
  let args: CliArgs;
  try {
    args = buildParser()
      .exitProcess(false)
      .fail((msg, err) => {
        throw new InputError(msg ?? err?.message ?? "bad arguments");
      })
      .parseSync(argv) as unknown as CliArgs;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return EXIT_INVALID;
  }

  let plan;
  try {
    const spec = loadModelSpec(args.model);
    const detector = new TinyDetector(spec);
    const mutants = parseGrid(args.grid);
    const layers = resolveSelector(detector.layerNames(), args.selector);
    const images = loadImageDir(args.images);
    if (args.threshold !== undefined && !(args.threshold > 0 && args.threshold < 1)) {
      throw new InputError(`threshold must be in (0, 1), got ${args.threshold}`);
    }
    plan = { detector, mutants, layers, images };
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return EXIT_INVALID;
  }

  try {
    const summary = runExport({
      detector: plan.detector,
      mutants: plan.mutants,
      layers: plan.layers,
      images: plan.images,
      runs: args.runs,
      outPath: args.out,
      scoreThreshold: args.threshold,
    });
    console.error(
      `wrote ${summary.lineCount} records ` +
        `(${summary.modelIds.length} models x ${plan.images.length} images x ${args.runs} runs) ` +
        `to ${summary.path}`,
    );
    return EXIT_OK;
  } catch (err) {
    if (err instanceof InputError) {
      console.error(`error: ${err.message}`);
      return EXIT_INVALID;
    }
    console.error(`internal error: ${(err as Error).message}`);
    return EXIT_INTERNAL;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(hideBin(process.argv));
}
