/** Deterministic seeded randomness for the synthetic runtime.
 *
 * mulberry32 over a 32-bit state; string seeds go through FNV-1a. Every
 * stream is a pure function of its seed, so captures and guarded runs are
 * bit-reproducible across processes and platforms.
 */

export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Mix several seed parts into one 32-bit stream seed. */
export function seedOf(...parts: Array<string | number>): number {
  return fnv1a(parts.map(String).join("|"));
}

export class Rng {
  private state: number;
  private spare: number | null = null;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Standard normal via Box-Muller; caches the spare draw. */
  gauss(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    while (u === 0) u = this.next(); // log(0) guard
    const r = Math.sqrt(-2 * Math.log(u));
    const theta = 2 * Math.PI * this.next();
    this.spare = r * Math.sin(theta);
    return r * Math.cos(theta);
  }

  fillGauss(out: Float64Array): Float64Array {
    for (let i = 0; i < out.length; i++) out[i] = this.gauss();
    return out;
  }
}
