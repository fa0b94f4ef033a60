/**
 * Deterministic keyed random streams.
 *
 * Every stochastic draw in the probe is keyed by what it is for (model id,
 * image id, run index, layer name), never by call order, so exports are
 * reproducible regardless of iteration order and a run can be regenerated
 * in isolation. Not cryptographic; reproducibility is the only goal.
 */

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export class KeyedRng {
  private state: number;
  private spare: number | null = null;

  constructor(...parts: Array<string | number>) {
    // Join with an unlikely separator so ("a", 12) and ("a1", 2) differ.
    this.state = fnv1a(parts.map(String).join("\u001f"));
    // A zero state would lock mulberry32 into a short cycle.
    if (this.state === 0) this.state = 0x9e3779b9;
  }

  /** Uniform in [0, 1), mulberry32. */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Standard normal via Box-Muller, caching the paired deviate. */
  normal(): number {
    if (this.spare !== null) {
      const value = this.spare;
      this.spare = null;
      return value;
    }
    let u = this.next();
    while (u === 0) u = this.next();
    const v = this.next();
    const radius = Math.sqrt(-2 * Math.log(u));
    this.spare = radius * Math.sin(2 * Math.PI * v);
    return radius * Math.cos(2 * Math.PI * v);
  }
}
