import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { ProbeImage } from "../src/probe.js";
import { KeyedRng } from "../src/rng.js";

export function noiseImage(imageId: string, seed: number, side = 64): ProbeImage {
  const rng = new KeyedRng("image", seed);
  const pixels = new Float32Array(side * side * 3);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = rng.next();
  }
  return { imageId, height: side, width: side, pixels };
}

export function noiseImages(count: number, side = 64): ProbeImage[] {
  return Array.from({ length: count }, (_, i) =>
    noiseImage(`img_${String(i).padStart(3, "0")}`, i, side),
  );
}

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Write images as *.json tensor files the CLI can ingest. */
export function writeImageDir(dir: string, images: ProbeImage[]): void {
  for (const img of images) {
    const doc = {
      image_id: img.imageId,
      height: img.height,
      width: img.width,
      channels: 3,
      pixels: Array.from(img.pixels),
    };
    fs.writeFileSync(path.join(dir, `${img.imageId}.json`), JSON.stringify(doc));
  }
}

export function writeModelSpec(dir: string, overrides: Record<string, unknown> = {}): string {
  const specPath = path.join(dir, "model.json");
  fs.writeFileSync(
    specPath,
    JSON.stringify({ name: "tiny-det", seed: 7, input_size: 64, classes: 5, ...overrides }),
  );
  return specPath;
}
