/** Small dense float64 matrix helpers, row-major. */

import { ValidationError } from "./errors.js";
import { Rng } from "./prng.js";

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array; // length rows * cols, row-major
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float64Array(rows * cols) };
}

export function matrixFrom(rows: number, cols: number, data: Float64Array | number[]): Matrix {
  const d = data instanceof Float64Array ? data : Float64Array.from(data);
  if (d.length !== rows * cols) {
    throw new ValidationError(`data length ${d.length} != ${rows}x${cols}`);
  }
  return { rows, cols, data: d };
}

export function clone(m: Matrix): Matrix {
  return { rows: m.rows, cols: m.cols, data: m.data.slice() };
}

export function gaussMatrix(rows: number, cols: number, rng: Rng): Matrix {
  const m = zeros(rows, cols);
  rng.fillGauss(m.data);
  return m;
}

/** a (n x k) times b (k x m). */
export function matmul(a: Matrix, b: Matrix): Matrix {
  if (a.cols !== b.rows) {
    throw new ValidationError(`matmul shape mismatch: ${a.cols} vs ${b.rows}`);
  }
  const out = zeros(a.rows, b.cols);
  for (let i = 0; i < a.rows; i++) {
    const arow = i * a.cols;
    const orow = i * b.cols;
    for (let k = 0; k < a.cols; k++) {
      const av = a.data[arow + k]!;
      if (av === 0) continue;
      const brow = k * b.cols;
      for (let j = 0; j < b.cols; j++) {
        out.data[orow + j]! += av * b.data[brow + j]!;
      }
    }
  }
  return out;
}

/** a (n x k) times b-transpose where b is (m x k). */
export function matmulT(a: Matrix, b: Matrix): Matrix {
  if (a.cols !== b.cols) {
    throw new ValidationError(`matmulT shape mismatch: ${a.cols} vs ${b.cols}`);
  }
  const out = zeros(a.rows, b.rows);
  for (let i = 0; i < a.rows; i++) {
    const arow = i * a.cols;
    for (let j = 0; j < b.rows; j++) {
      const brow = j * a.cols;
      let acc = 0;
      for (let k = 0; k < a.cols; k++) {
        acc += a.data[arow + k]! * b.data[brow + k]!;
      }
      out.data[i * b.rows + j] = acc;
    }
  }
  return out;
}

/** Column slice [lo, hi) as a copy. */
export function sliceCols(m: Matrix, lo: number, hi: number): Matrix {
  if (lo < 0 || hi > m.cols || lo >= hi) {
    throw new ValidationError(`bad column slice [${lo}, ${hi}) of ${m.cols}`);
  }
  const w = hi - lo;
  const out = zeros(m.rows, w);
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < w; j++) {
      out.data[i * w + j] = m.data[i * m.cols + lo + j]!;
    }
  }
  return out;
}

export function maxAbsDiff(a: Matrix, b: Matrix): number {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new ValidationError(
      `shape mismatch: ${a.rows}x${a.cols} vs ${b.rows}x${b.cols}`,
    );
  }
  let worst = 0;
  for (let i = 0; i < a.data.length; i++) {
    const d = Math.abs(a.data[i]! - b.data[i]!);
    if (d > worst) worst = d;
  }
  return worst;
}

/** Orthonormal d x r basis from a seeded Gaussian block (modified Gram-Schmidt, two passes). */
export function randomOrthonormal(d: number, r: number, rng: Rng): Matrix {
  if (r > d) throw new ValidationError(`rank ${r} exceeds dimension ${d}`);
  const cols: Float64Array[] = [];
  for (let c = 0; c < r; c++) {
    let v = new Float64Array(d);
    for (let i = 0; i < d; i++) v[i] = rng.gauss();
    for (let pass = 0; pass < 2; pass++) {
      for (const u of cols) {
        let dot = 0;
        for (let i = 0; i < d; i++) dot += v[i]! * u[i]!;
        for (let i = 0; i < d; i++) v[i]! -= dot * u[i]!;
      }
    }
    let norm = 0;
    for (let i = 0; i < d; i++) norm += v[i]! * v[i]!;
    norm = Math.sqrt(norm);
    if (norm < 1e-12) throw new ValidationError("degenerate Gram-Schmidt column");
    for (let i = 0; i < d; i++) v[i]! /= norm;
    cols.push(v);
  }
  const out = zeros(d, r);
  for (let c = 0; c < r; c++) {
    for (let i = 0; i < d; i++) out.data[i * r + c] = cols[c]![i]!;
  }
  return out;
}

/** Round every entry to the nearest float32; output stays a float64 matrix. */
export function quantizeF32(m: Matrix): Matrix {
  const out = zeros(m.rows, m.cols);
  for (let i = 0; i < m.data.length; i++) out.data[i] = Math.fround(m.data[i]!);
  return out;
}
