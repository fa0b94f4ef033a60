/**
 * A compact seeded convolutional detector.
 *
 * Three strided 3x3 backbone convolutions feed a 1x1 head that predicts,
 * per grid cell: box offsets (tx, ty), box extent (tw, th), an objectness
 * logit, and one logit per class. Weights are drawn from a keyed stream,
 * so a ModelSpec fully determines the network and inference is
 * reproducible bit for bit.
 *
 * The sandbox has no pretrained weights to download; a seeded network
 * stands in for one. Nothing downstream depends on detection quality,
 * only on determinism and on the head producing well-formed boxes and
 * pre-argmax probability vectors.
 */

import * as tf from "@tensorflow/tfjs";

import { KeyedRng } from "./rng.js";
import { WireDetection } from "./wire.js";

export interface ModelSpec {
  name: string;
  seed: number;
  inputSize: number;
  classes: number;
  scoreThreshold: number;
}

/**
 * Head calibration. The objectness bias sits below zero so only cells the
 * (seeded) features genuinely excite cross the default 0.5 score
 * threshold; the gain widens the logit spread so some do. Calibrated so a
 * 64 px uniform-noise image yields a handful of detections.
 */
export const OBJECTNESS_BIAS = -1.0;
export const HEAD_GAIN = 3.0;

const NMS_IOU = 0.5;

interface ConvParams {
  name: string;
  kernel: tf.Tensor4D;
  bias: tf.Tensor1D;
  stride: number;
}

export type ActivationTap = (
  layer: string,
  data: Float32Array,
  height: number,
  width: number,
  channels: number,
) => boolean;

function sigmoid(x: number): number {
  return 1 / (1 + Math.exp(-x));
}

function iou(a: WireDetection["bbox"], b: WireDetection["bbox"]): number {
  const ix = Math.max(0, Math.min(a[2], b[2]) - Math.max(a[0], b[0]));
  const iy = Math.max(0, Math.min(a[3], b[3]) - Math.max(a[1], b[1]));
  const inter = ix * iy;
  if (inter === 0) return 0;
  const areaA = (a[2] - a[0]) * (a[3] - a[1]);
  const areaB = (b[2] - b[0]) * (b[3] - b[1]);
  return inter / (areaA + areaB - inter);
}

export class TinyDetector {
  readonly spec: ModelSpec;
  readonly gridCells: number;
  private readonly convs: ConvParams[];
  private readonly head: ConvParams;

  constructor(spec: ModelSpec) {
    if (spec.inputSize % 8 !== 0) {
      throw new Error(`input size must be a multiple of 8, got ${spec.inputSize}`);
    }
    this.spec = spec;
    this.gridCells = spec.inputSize / 8;
    const widths: Array<[number, number]> = [
      [3, 8],
      [8, 16],
      [16, 32],
    ];
    this.convs = widths.map(([inC, outC], i) =>
      this.makeConv(`conv${i + 1}`, 3, inC, outC, 2, 1.0),
    );
    this.head = this.makeConv("head", 1, 32, 5 + spec.classes, 1, HEAD_GAIN);
  }

  /** Backbone layer names, shallowest first; instrumentation targets. */
  layerNames(): string[] {
    return this.convs.map((c) => c.name);
  }

  private makeConv(
    name: string,
    size: number,
    inC: number,
    outC: number,
    stride: number,
    gain: number,
  ): ConvParams {
    const rng = new KeyedRng(this.spec.seed, "weights", name);
    const fanIn = size * size * inC;
    const scale = gain * Math.sqrt(2 / fanIn);
    const kernelData = new Float32Array(size * size * inC * outC);
    for (let i = 0; i < kernelData.length; i++) {
      kernelData[i] = rng.normal() * scale;
    }
    const biasData = new Float32Array(outC);
    if (name === "head") {
      biasData[4] = OBJECTNESS_BIAS;
    }
    return {
      name,
      kernel: tf.tensor4d(kernelData, [size, size, inC, outC]),
      bias: tf.tensor1d(biasData),
      stride,
    };
  }

  /**
   * One forward pass. The tap sees each backbone activation after its
   * nonlinearity and may mutate the buffer in place, returning true to
   * signal the change; the head output is returned raw (pre-decode).
   */
  forward(image: tf.Tensor3D, tap?: ActivationTap): Float32Array {
    return tf.tidy(() => {
      let x = image.expandDims(0) as tf.Tensor4D;
      for (const conv of this.convs) {
        x = tf.relu(
          tf.add(tf.conv2d(x, conv.kernel, conv.stride, "same"), conv.bias),
        ) as tf.Tensor4D;
        if (tap) {
          const [, h, w, c] = x.shape;
          const data = new Float32Array(x.dataSync());
          if (tap(conv.name, data, h, w, c)) {
            x = tf.tensor4d(data, [1, h, w, c]);
          }
        }
      }
      const head = tf.add(tf.conv2d(x, this.head.kernel, 1, "same"), this.head.bias);
      return new Float32Array(head.dataSync());
    });
  }

  /** Head grid to thresholded, per-class NMS-filtered detections. */
  decode(headData: Float32Array, threshold: number): WireDetection[] {
    const grid = this.gridCells;
    const perCell = 5 + this.spec.classes;
    const cell = this.spec.inputSize / grid;
    const side = this.spec.inputSize;
    const raw: WireDetection[] = [];

    for (let gy = 0; gy < grid; gy++) {
      for (let gx = 0; gx < grid; gx++) {
        const base = (gy * grid + gx) * perCell;
        const objProb = sigmoid(headData[base + 4]);

        const logits = new Array<number>(this.spec.classes);
        let maxLogit = -Infinity;
        for (let k = 0; k < this.spec.classes; k++) {
          logits[k] = headData[base + 5 + k];
          if (logits[k] > maxLogit) maxLogit = logits[k];
        }
        let mass = 0;
        const probs = logits.map((l) => {
          const e = Math.exp(l - maxLogit);
          mass += e;
          return e;
        });
        let label = 0;
        for (let k = 0; k < probs.length; k++) {
          probs[k] /= mass;
          if (probs[k] > probs[label]) label = k;
        }

        const score = objProb * probs[label];
        if (score <= threshold) continue;

        const cx = (gx + sigmoid(headData[base])) * cell;
        const cy = (gy + sigmoid(headData[base + 1])) * cell;
        const w = (0.1 + 0.4 * sigmoid(headData[base + 2])) * side;
        const h = (0.1 + 0.4 * sigmoid(headData[base + 3])) * side;
        raw.push({
          bbox: [
            Math.max(0, cx - w / 2),
            Math.max(0, cy - h / 2),
            Math.min(side, cx + w / 2),
            Math.min(side, cy + h / 2),
          ],
          label,
          score,
          probs,
        });
      }
    }

    raw.sort((a, b) => b.score - a.score);
    const kept: WireDetection[] = [];
    for (const candidate of raw) {
      const clash = kept.some(
        (k) => k.label === candidate.label && iou(k.bbox, candidate.bbox) > NMS_IOU,
      );
      if (!clash) kept.push(candidate);
    }
    return kept;
  }
}
