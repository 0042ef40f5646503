/** DTF1 tensor files, bit-compatible with the core's reader and writer.
 *
 * Layout, little-endian throughout:
 *   bytes 0-3   magic "DTF1"
 *   byte  4     dtype code, 0 = float32 (only code defined)
 *   byte  5     ndim, 2 or 3
 *   then        ndim u64 dims, each >= 1
 *   then        float32 payload, C row-major, exact length
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as crypto from "node:crypto";

import { FormatError, ValidationError } from "./errors.js";
import { Matrix, matrixFrom } from "./linalg.js";

const MAGIC = Buffer.from("DTF1", "ascii");
const DTYPE_F32 = 0;

export interface Tensor {
  dims: number[]; // length 2 or 3
  data: Float64Array; // row-major, values exactly representable in f32
}

function headerLength(ndim: number): number {
  return 6 + 8 * ndim;
}

export function encodeTensor(dims: number[], values: ArrayLike<number>): Buffer {
  if (dims.length !== 2 && dims.length !== 3) {
    throw new ValidationError(`ndim must be 2 or 3, got ${dims.length}`);
  }
  let count = 1;
  for (const d of dims) {
    if (!Number.isInteger(d) || d < 1) {
      throw new ValidationError(`dims must be integers >= 1, got ${dims}`);
    }
    count *= d;
  }
  if (values.length !== count) {
    throw new ValidationError(`payload length ${values.length} != prod(dims) ${count}`);
  }
  const buf = Buffer.alloc(headerLength(dims.length) + 4 * count);
  MAGIC.copy(buf, 0);
  buf.writeUInt8(DTYPE_F32, 4);
  buf.writeUInt8(dims.length, 5);
  dims.forEach((d, i) => buf.writeBigUInt64LE(BigInt(d), 6 + 8 * i));
  let off = headerLength(dims.length);
  for (let i = 0; i < count; i++) {
    const v = Math.fround(values[i]!);
    if (!Number.isFinite(v)) {
      throw new ValidationError("tensor entries must be finite in 32-bit range");
    }
    buf.writeFloatLE(v, off);
    off += 4;
  }
  return buf;
}

export function decodeTensor(blob: Buffer, label = "tensor"): Tensor {
  if (blob.length < 6) {
    throw new FormatError(`${label}: truncated header (${blob.length} bytes)`);
  }
  if (!blob.subarray(0, 4).equals(MAGIC)) {
    throw new FormatError(
      `${label}: bad magic ${JSON.stringify(blob.subarray(0, 4).toString("latin1"))}, expected "DTF1"`,
    );
  }
  const dtype = blob.readUInt8(4);
  if (dtype !== DTYPE_F32) {
    throw new FormatError(`${label}: unsupported dtype code ${dtype}`);
  }
  const ndim = blob.readUInt8(5);
  if (ndim !== 2 && ndim !== 3) {
    throw new FormatError(`${label}: ndim must be 2 or 3, got ${ndim}`);
  }
  const hdr = headerLength(ndim);
  if (blob.length < hdr) {
    throw new FormatError(`${label}: truncated header (${blob.length} bytes)`);
  }
  const dims: number[] = [];
  let count = 1;
  for (let i = 0; i < ndim; i++) {
    const d = blob.readBigUInt64LE(6 + 8 * i);
    if (d < 1n || d > 0x7fffffffn) {
      throw new FormatError(`${label}: dimension ${d} out of range`);
    }
    dims.push(Number(d));
    count *= Number(d);
  }
  const expected = 4 * count;
  const got = blob.length - hdr;
  if (got !== expected) {
    throw new FormatError(`${label}: payload length ${got} bytes, expected ${expected}`);
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    const v = blob.readFloatLE(hdr + 4 * i);
    if (!Number.isFinite(v)) {
      throw new ValidationError(`${label}: non-finite entries in payload`);
    }
    data[i] = v;
  }
  return { dims, data };
}

export function readTensorFile(filePath: string): Tensor {
  let blob: Buffer;
  try {
    blob = fs.readFileSync(filePath);
  } catch (err) {
    throw new FormatError(`${filePath}: cannot read: ${(err as Error).message}`);
  }
  return decodeTensor(blob, filePath);
}

/** Atomic write: temp file in the same directory, then rename. */
export function writeTensorFile(filePath: string, dims: number[], values: ArrayLike<number>): void {
  const blob = encodeTensor(dims, values);
  const dir = path.dirname(filePath);
  fs.mkdirSync(dir, { recursive: true });
  const tmp = path.join(dir, `.${path.basename(filePath)}.${crypto.randomBytes(6).toString("hex")}.tmp`);
  fs.writeFileSync(tmp, blob);
  fs.renameSync(tmp, filePath);
}

export function writeMatrixFile(filePath: string, m: Matrix): void {
  writeTensorFile(filePath, [m.rows, m.cols], m.data);
}

/** Read a 2-axis tensor as a matrix; 3-axis files are rejected here. */
export function readMatrixFile(filePath: string): Matrix {
  const t = readTensorFile(filePath);
  if (t.dims.length !== 2) {
    throw new FormatError(`${filePath}: expected a 2-axis tensor, got ${t.dims.length}`);
  }
  return matrixFrom(t.dims[0]!, t.dims[1]!, t.data);
}
