/** In-process mirror of the core's attention edit.
 *
 * Same chain, float64 end to end: per-token style-coordinate norms of the
 * pre-edit Q/K/V, per-role max normalization, weighted fusion, sigmoid
 * modulation, affine map into [alpha_min, alpha_max]; then keys and values
 * lose gamma_i of their style-span component and queries gain gamma_q of
 * their content-span component. This path is only ever used alongside the
 * dual-path check against the core CLI; the file round-trip through the
 * core is the reference, never this code.
 */

import * as fs from "node:fs";

import { FormatError, ValidationError } from "./errors.js";
import { Matrix, clone, matmul, matmulT } from "./linalg.js";
import { readMatrixFile } from "./dtf.js";
import { Qkv } from "./model.js";

export interface AecParams {
  w_q: number;
  w_k: number;
  w_v: number;
  k_steepness: number;
  tau: number;
  alpha_min: number;
  alpha_max: number;
}

export const AEC_DEFAULTS: AecParams = {
  w_q: 0.2,
  w_k: 0.3,
  w_v: 0.5,
  k_steepness: 10.0,
  tau: 0.5,
  alpha_min: 0.2,
  alpha_max: 1.0,
};

export interface EditParams {
  gamma_q: number;
  aec: AecParams;
}

export const EDIT_DEFAULTS: EditParams = { gamma_q: 0.25, aec: AEC_DEFAULTS };

/** Extract the fields this mirror interprets from a core pipeline config
 * object. Everything else is the core's business; full validation of the
 * object happens when the core CLI consumes the same JSON. */
export function editParamsFromPipeline(pipeline: Record<string, unknown>): EditParams {
  const num = (v: unknown, fallback: number, where: string): number => {
    if (v === undefined) return fallback;
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new ValidationError(`pipeline.${where} must be a finite number`);
    }
    return v;
  };
  const aecRaw = pipeline.aec ?? {};
  if (typeof aecRaw !== "object" || aecRaw === null || Array.isArray(aecRaw)) {
    throw new ValidationError("pipeline.aec must be a JSON object");
  }
  const a = aecRaw as Record<string, unknown>;
  return {
    gamma_q: num(pipeline.gamma_q, EDIT_DEFAULTS.gamma_q, "gamma_q"),
    aec: {
      w_q: num(a.w_q, AEC_DEFAULTS.w_q, "aec.w_q"),
      w_k: num(a.w_k, AEC_DEFAULTS.w_k, "aec.w_k"),
      w_v: num(a.w_v, AEC_DEFAULTS.w_v, "aec.w_v"),
      k_steepness: num(a.k_steepness, AEC_DEFAULTS.k_steepness, "aec.k_steepness"),
      tau: num(a.tau, AEC_DEFAULTS.tau, "aec.tau"),
      alpha_min: num(a.alpha_min, AEC_DEFAULTS.alpha_min, "aec.alpha_min"),
      alpha_max: num(a.alpha_max, AEC_DEFAULTS.alpha_max, "aec.alpha_max"),
    },
  };
}

export interface SubspaceTs {
  basis: Matrix; // d x r, orthonormal columns
  kind: "style" | "content";
}

/** Load a core-written subspace: D x r DTF1 tensor plus its JSON sidecar. */
export function loadSubspace(dtfPath: string): SubspaceTs {
  const basis = readMatrixFile(dtfPath);
  let meta: Record<string, unknown>;
  try {
    meta = JSON.parse(fs.readFileSync(dtfPath + ".json", "utf8"));
  } catch (err) {
    throw new FormatError(`${dtfPath}.json: missing or bad sidecar: ${(err as Error).message}`);
  }
  const kind = meta.kind;
  if (kind !== "style" && kind !== "content") {
    throw new ValidationError(`${dtfPath}: sidecar kind must be style|content, got ${JSON.stringify(kind)}`);
  }
  // mirror the core's load gate: columns orthonormal to f32 round-trip noise
  const gram = matmul(transposeView(basis), basis);
  let worst = 0;
  for (let i = 0; i < basis.cols; i++) {
    for (let j = 0; j < basis.cols; j++) {
      const want = i === j ? 1 : 0;
      const err = Math.abs(gram.data[i * basis.cols + j]! - want);
      if (err > worst) worst = err;
    }
  }
  if (worst > 1e-5) {
    throw new ValidationError(`${dtfPath}: basis not orthonormal (gram error ${worst.toExponential(2)})`);
  }
  return { basis, kind };
}

function transposeView(m: Matrix): Matrix {
  const out = { rows: m.cols, cols: m.rows, data: new Float64Array(m.cols * m.rows) };
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < m.cols; j++) {
      out.data[j * m.rows + i] = m.data[i * m.cols + j]!;
    }
  }
  return out;
}

function checkDim(m: Matrix, sub: SubspaceTs): void {
  if (m.cols !== sub.basis.rows) {
    throw new ValidationError(`row dim ${m.cols} vs subspace dim ${sub.basis.rows}`);
  }
}

/** (x U) U', each row's orthogonal projection onto the subspace span. */
export function projectRows(m: Matrix, sub: SubspaceTs): Matrix {
  checkDim(m, sub);
  return matmulT(matmul(m, sub.basis), sub.basis);
}

/** s_i = ||x_i U||_2 per token. */
export function styleScores(m: Matrix, sub: SubspaceTs): Float64Array {
  checkDim(m, sub);
  const coords = matmul(m, sub.basis);
  const out = new Float64Array(m.rows);
  for (let i = 0; i < m.rows; i++) {
    let acc = 0;
    for (let c = 0; c < coords.cols; c++) {
      const v = coords.data[i * coords.cols + c]!;
      acc += v * v;
    }
    out[i] = Math.sqrt(acc);
  }
  return out;
}

export function normalizeScores(s: Float64Array): Float64Array {
  let peak = 0;
  for (const v of s) {
    if (v < 0) throw new ValidationError("scores must be non-negative");
    if (v > peak) peak = v;
  }
  const out = new Float64Array(s.length);
  if (peak === 0) return out;
  for (let i = 0; i < s.length; i++) out[i] = s[i]! / peak;
  return out;
}

function sigmoid(x: number): number {
  // one-sided exp keeps both tails exact, like the core's expit
  if (x >= 0) return 1 / (1 + Math.exp(-x));
  const e = Math.exp(x);
  return e / (1 + e);
}

export function computeGamma(qkv: Qkv, style: SubspaceTs, p: AecParams): Float64Array {
  const nq = normalizeScores(styleScores(qkv.q, style));
  const nk = normalizeScores(styleScores(qkv.k, style));
  const nv = normalizeScores(styleScores(qkv.v, style));
  const out = new Float64Array(nq.length);
  for (let i = 0; i < out.length; i++) {
    const s = p.w_q * nq[i]! + p.w_k * nk[i]! + p.w_v * nv[i]!;
    const m = sigmoid(p.k_steepness * (s - p.tau));
    out[i] = p.alpha_min + (p.alpha_max - p.alpha_min) * m;
  }
  return out;
}

/** Row i becomes m_i - gamma[i] * proj(m_i). */
export function suppressStyle(m: Matrix, sub: SubspaceTs, gamma: Float64Array): Matrix {
  checkDim(m, sub);
  if (gamma.length !== m.rows) {
    throw new ValidationError(`gamma length ${gamma.length} vs ${m.rows} tokens`);
  }
  for (const g of gamma) {
    if (!(g >= 0 && g <= 1)) throw new ValidationError("gamma entries must lie in [0, 1]");
  }
  const proj = projectRows(m, sub);
  const out = clone(m);
  for (let i = 0; i < m.rows; i++) {
    const g = gamma[i]!;
    for (let c = 0; c < m.cols; c++) {
      out.data[i * m.cols + c]! -= g * proj.data[i * m.cols + c]!;
    }
  }
  return out;
}

/** Q + gamma_q * (Q U) U'. */
export function enhanceContent(q: Matrix, sub: SubspaceTs, gammaQ: number): Matrix {
  if (sub.kind !== "content") {
    throw new ValidationError("enhanceContent needs a content subspace");
  }
  if (gammaQ < 0) throw new ValidationError(`gamma_q must be >= 0, got ${gammaQ}`);
  const proj = projectRows(q, sub);
  const out = clone(q);
  for (let i = 0; i < out.data.length; i++) {
    out.data[i]! += gammaQ * proj.data[i]!;
  }
  return out;
}

/** One-shot edit: gamma from the pre-edit triple, then Q boost, K/V suppression. */
export function applyEdit(qkv: Qkv, style: SubspaceTs, content: SubspaceTs, p: EditParams): Qkv {
  if (style.kind !== "style") {
    throw new ValidationError("applyEdit needs a style subspace first");
  }
  const gamma = computeGamma(qkv, style, p.aec);
  return {
    q: enhanceContent(qkv.q, content, p.gamma_q),
    k: suppressStyle(qkv.k, style, gamma),
    v: suppressStyle(qkv.v, style, gamma),
  };
}
