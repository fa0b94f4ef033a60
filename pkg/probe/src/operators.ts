/**
 * The two inference-time mutation operators and their id grammar.
 *
 * mcd: test-time dropout on a layer's activation map, inverted scaling so
 * the expected activation is unchanged.
 *
 * mcb: dropblock, zeroing square spatial regions per channel; kept units
 * are rescaled by total/kept. Block sizes are odd by contract. A block
 * larger than the feature map degenerates to dropping the whole map with
 * probability ~rate, which is the intended heavy-mutation limit.
 */

import { KeyedRng } from "./rng.js";

export type OperatorKind = "mcd" | "mcb";

export interface MutantSpec {
  kind: OperatorKind;
  rate: number;
  block?: number;
}

export function formatModelId(mutant: MutantSpec): string {
  const rate = mutant.rate.toFixed(2);
  return mutant.kind === "mcd" ? `mcd:${rate}` : `mcb:${rate}x${mutant.block}`;
}

const MCD_ID = /^mcd:(\d\.\d{2})$/;
const MCB_ID = /^mcb:(\d\.\d{2})x(\d+)$/;

export function parseMutantId(text: string): MutantSpec {
  let match = MCD_ID.exec(text);
  if (match) {
    const rate = Number(match[1]);
    if (!(rate > 0 && rate < 1)) {
      throw new Error(`mutant rate must be in (0, 1), got ${text}`);
    }
    return { kind: "mcd", rate };
  }
  match = MCB_ID.exec(text);
  if (match) {
    const rate = Number(match[1]);
    const block = Number(match[2]);
    if (!(rate > 0 && rate < 1)) {
      throw new Error(`mutant rate must be in (0, 1), got ${text}`);
    }
    if (block < 1 || block % 2 === 0) {
      throw new Error(`block size must be odd and positive, got ${text}`);
    }
    return { kind: "mcb", rate, block };
  }
  throw new Error(
    `unrecognized mutant id ${JSON.stringify(text)}; expected mcd:<rate> or mcb:<rate>x<block>`,
  );
}

/** Comma-separated mutant ids, e.g. "mcd:0.25,mcb:0.30x5". */
export function parseGrid(text: string): MutantSpec[] {
  const entries = text
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
  if (entries.length === 0) {
    throw new Error("mutant grid is empty");
  }
  return entries.map(parseMutantId);
}

/** In-place inverted dropout over a flat activation buffer. */
export function applyDropout(data: Float32Array, rate: number, rng: KeyedRng): void {
  const scale = 1 / (1 - rate);
  for (let i = 0; i < data.length; i++) {
    data[i] = rng.next() < rate ? 0 : data[i] * scale;
  }
}

/**
 * In-place dropblock over a [height, width, channels] activation buffer
 * (row-major, channel fastest). Blocks are sampled per channel.
 */
export function applyDropBlock(
  data: Float32Array,
  height: number,
  width: number,
  channels: number,
  rate: number,
  block: number,
  rng: KeyedRng,
): void {
  const size = Math.min(block, height, width);
  const validH = height - size + 1;
  const validW = width - size + 1;
  // Center density chosen so the expected dropped fraction approximates
  // the rate before block overlap.
  const gamma = (rate * height * width) / (size * size * validH * validW);
  const dropped = new Uint8Array(height * width);

  for (let c = 0; c < channels; c++) {
    dropped.fill(0);
    let kept = height * width;
    for (let cy = 0; cy < validH; cy++) {
      for (let cx = 0; cx < validW; cx++) {
        if (rng.next() >= gamma) continue;
        for (let y = cy; y < cy + size; y++) {
          for (let x = cx; x < cx + size; x++) {
            const cell = y * width + x;
            if (!dropped[cell]) {
              dropped[cell] = 1;
              kept--;
            }
          }
        }
      }
    }
    if (kept === height * width) continue;
    const scale = kept > 0 ? (height * width) / kept : 0;
    for (let cell = 0; cell < height * width; cell++) {
      const index = cell * channels + c;
      data[index] = dropped[cell] ? 0 : data[index] * scale;
    }
  }
}
