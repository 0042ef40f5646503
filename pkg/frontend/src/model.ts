/** Deterministic synthetic latent-diffusion runtime.
 *
 * Stands in for a real sampler: it exposes named attention blocks with fixed
 * geometry (channels, heads, square latent), produces per-token features at
 * every (prompt, block, timestep), projects them to Q/K/V, and runs
 * multi-head attention. Features follow a planted structure so the triplet
 * logic downstream has something real to find: a prompt of the form
 * "X in the style of Y" contributes style coefficients keyed by Y and
 * content coefficients keyed by X, over per-block orthonormal bases.
 * Prompts without that shape use the whole string for both keys.
 *
 * The per-timestep noise stream is keyed by (block, timestep, seed) only,
 * never by the prompt, so all runs that share a seed stay token-aligned.
 * All runtime tensors are quantized to float32-representable values: what
 * a capture dumps to DTF1 is bit-for-bit what the runtime computes with.
 */

import { BlockGeom, ModelConfig } from "./config.js";
import { ValidationError } from "./errors.js";
import {
  Matrix,
  gaussMatrix,
  matmul,
  matmulT,
  quantizeF32,
  randomOrthonormal,
  sliceCols,
  zeros,
} from "./linalg.js";
import { Rng, seedOf } from "./prng.js";

export interface Qkv {
  q: Matrix;
  k: Matrix;
  v: Matrix;
}

export interface EditHook {
  blocks: Set<string>;
  edit: (block: string, t: number, qkv: Qkv, geom: BlockGeom) => Qkv;
}

export function promptKeys(prompt: string): { styleId: string; contentId: string } {
  const marker = " in the style of ";
  const at = prompt.indexOf(marker);
  if (at > 0 && at + marker.length < prompt.length) {
    return {
      contentId: prompt.slice(0, at),
      styleId: prompt.slice(at + marker.length),
    };
  }
  return { styleId: prompt, contentId: prompt };
}

export class SyntheticDiffusionModel {
  constructor(public readonly cfg: ModelConfig) {}

  blockNames(): string[] {
    return Object.keys(this.cfg.blocks);
  }

  blockInfo(name: string): BlockGeom {
    const geom = this.cfg.blocks[name];
    if (geom === undefined) {
      throw new ValidationError(`missing block id ${JSON.stringify(name)}`);
    }
    return geom;
  }

  get totalSteps(): number {
    return this.cfg.total_steps;
  }

  /** N x channels token features, float32-representable. */
  computeFeatures(prompt: string, block: string, t: number, seed: number): Matrix {
    const geom = this.blockInfo(block);
    const n = geom.latent * geom.latent;
    const { styleId, contentId } = promptKeys(prompt);
    const rs = this.cfg.planted.r_style;
    const rc = this.cfg.planted.r_content;

    // one joint draw keeps the planted style and content spans orthogonal
    const joint = randomOrthonormal(geom.channels, rs + rc, new Rng(seedOf("basis-style", block)));
    const us = sliceCols(joint, 0, rs);
    const uc = sliceCols(joint, rs, rs + rc);

    const coeffS = gaussMatrix(n, rs, new Rng(seedOf("coeff-style", styleId, block, t, seed)));
    const coeffC = gaussMatrix(n, rc, new Rng(seedOf("coeff-content", contentId, block, t, seed)));
    const styled = matmulT(coeffS, us); // (n x rs)(rs x d) via basis transpose
    const contented = matmulT(coeffC, uc);

    const sigma = this.cfg.planted.noise_sigma;
    const noiseRng = new Rng(seedOf("noise", block, t, seed));
    const out = zeros(n, geom.channels);
    for (let i = 0; i < out.data.length; i++) {
      out.data[i] = styled.data[i]! + contented.data[i]! + sigma * noiseRng.gauss();
    }
    return quantizeF32(out);
  }

  /** Fixed per-block linear projections of the features. */
  computeQkv(block: string, features: Matrix): Qkv {
    const geom = this.blockInfo(block);
    if (features.cols !== geom.channels) {
      throw new ValidationError(
        `features dim ${features.cols} vs block channels ${geom.channels}`,
      );
    }
    const project = (role: string): Matrix => {
      const w = gaussMatrix(geom.channels, geom.channels, new Rng(seedOf("proj", role, block)));
      const scale = 1 / Math.sqrt(geom.channels);
      for (let i = 0; i < w.data.length; i++) w.data[i]! *= scale;
      return quantizeF32(matmul(features, w));
    };
    return { q: project("q"), k: project("k"), v: project("v") };
  }

  /** Multi-head softmax attention, heads concatenated back to N x channels. */
  attention(geom: BlockGeom, qkv: Qkv): Matrix {
    const { q, k, v } = qkv;
    const n = q.rows;
    const hd = geom.channels / geom.heads;
    const out = zeros(n, geom.channels);
    for (let h = 0; h < geom.heads; h++) {
      const qh = sliceCols(q, h * hd, (h + 1) * hd);
      const kh = sliceCols(k, h * hd, (h + 1) * hd);
      const vh = sliceCols(v, h * hd, (h + 1) * hd);
      const logits = matmulT(qh, kh);
      const scale = 1 / Math.sqrt(hd);
      for (let i = 0; i < n; i++) {
        const row = i * n;
        let mx = -Infinity;
        for (let j = 0; j < n; j++) {
          logits.data[row + j]! *= scale;
          if (logits.data[row + j]! > mx) mx = logits.data[row + j]!;
        }
        let z = 0;
        for (let j = 0; j < n; j++) {
          logits.data[row + j] = Math.exp(logits.data[row + j]! - mx);
          z += logits.data[row + j]!;
        }
        for (let j = 0; j < n; j++) logits.data[row + j]! /= z;
      }
      const mixed = matmul(logits, vh);
      for (let i = 0; i < n; i++) {
        for (let c = 0; c < hd; c++) {
          out.data[i * geom.channels + h * hd + c] = mixed.data[i * hd + c]!;
        }
      }
    }
    return out;
  }

  /** Full denoising loop; edited blocks contribute their edited attention
   * to the image accumulator. Returns PGM (P5) image bytes. */
  runInference(prompt: string, seed: number, editHook?: EditHook): Buffer {
    const imageBlocks = this.blockNames();
    const side = Math.max(...imageBlocks.map((b) => this.blockInfo(b).latent));
    const acc = new Float64Array(side * side);

    for (let t = 0; t < this.totalSteps; t++) {
      for (const block of this.blockNames()) {
        const geom = this.blockInfo(block);
        const features = this.computeFeatures(prompt, block, t, seed);
        let qkv = this.computeQkv(block, features);
        if (editHook !== undefined && editHook.blocks.has(block)) {
          qkv = editHook.edit(block, t, qkv, geom);
        }
        const attn = this.attention(geom, qkv);
        // only blocks on the full-resolution grid paint into the image
        if (geom.latent === side) {
          for (let i = 0; i < attn.rows; i++) {
            let s = 0;
            for (let c = 0; c < geom.channels; c++) {
              s += Math.abs(attn.data[i * geom.channels + c]!);
            }
            acc[i]! += s / geom.channels;
          }
        }
      }
    }
    return renderPgm(acc, side, side);
  }
}

export function renderPgm(values: Float64Array, width: number, height: number): Buffer {
  if (values.length !== width * height) {
    throw new ValidationError(`image buffer ${values.length} != ${width}x${height}`);
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  const pixels = Buffer.alloc(values.length);
  for (let i = 0; i < values.length; i++) {
    pixels[i] = hi > lo ? Math.round(((values[i]! - lo) / (hi - lo)) * 255) : 128;
  }
  return Buffer.concat([header, pixels]);
}
