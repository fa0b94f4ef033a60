/**
 * Record serialization in the analysis engine's exact wire format: one JSON
 * object per line with model_id / image_id / run / detections, boxes as
 * [x1, y1, x2, y2] reals, probs pre-argmax.
 */

export interface WireDetection {
  bbox: [number, number, number, number];
  label: number;
  score: number;
  probs: number[];
}

export function recordLine(
  modelId: string,
  imageId: string,
  run: number,
  detections: WireDetection[],
): string {
  return JSON.stringify({
    model_id: modelId,
    image_id: imageId,
    run,
    detections: detections.map((d) => ({
      bbox: d.bbox,
      label: d.label,
      score: d.score,
      probs: d.probs,
    })),
  });
}
