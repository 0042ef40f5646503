import { describe, expect, it } from "vitest";

import {
  Rng,
  SyntheticDiffusionModel,
  ValidationError,
  matmul,
  matmulT,
  matrixFrom,
  promptKeys,
  randomOrthonormal,
  seedOf,
  sliceCols,
} from "../src/index.js";
import { baseConfig, tmpDir } from "./helpers.js";

function model(): SyntheticDiffusionModel {
  return new SyntheticDiffusionModel(baseConfig(tmpDir("model-")).model);
}

describe("prompt keys", () => {
  it("splits on the style marker", () => {
    expect(promptKeys("A road in the style of Van Gogh")).toEqual({
      styleId: "Van Gogh",
      contentId: "A road",
    });
  });

  it("falls back to the whole prompt without a marker", () => {
    expect(promptKeys("just a road")).toEqual({ styleId: "just a road", contentId: "just a road" });
  });
});

describe("synthetic features", () => {
  it("is deterministic in (prompt, block, t, seed)", () => {
    const m = model();
    const a = m.computeFeatures("A road in the style of Van Gogh", "down_blocks[0]", 2, 7);
    const b = m.computeFeatures("A road in the style of Van Gogh", "down_blocks[0]", 2, 7);
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
    const c = m.computeFeatures("A road in the style of Van Gogh", "down_blocks[0]", 3, 7);
    expect(Array.from(a.data)).not.toEqual(Array.from(c.data));
  });

  it("emits only f32-representable values", () => {
    const m = model();
    const f = m.computeFeatures("A road in the style of Van Gogh", "up_blocks[3]", 4, 7);
    for (const v of f.data) expect(Math.fround(v)).toBe(v);
    const qkv = m.computeQkv("up_blocks[3]", f);
    for (const role of [qkv.q, qkv.k, qkv.v]) {
      for (const v of role.data) expect(Math.fround(v)).toBe(v);
    }
  });

  it("confines same-style prompt differences to the content span", () => {
    const m = model();
    const block = "down_blocks[0]";
    // same styleId and same (block, t, seed) noise: the difference lives in
    // the content span, so its style-span projection is quantization dust
    const a = m.computeFeatures("A road in the style of Van Gogh", block, 2, 7);
    const p = m.computeFeatures("A flower in the style of Van Gogh", block, 2, 7);
    const delta = new Float64Array(a.data.length);
    for (let i = 0; i < delta.length; i++) delta[i] = a.data[i]! - p.data[i]!;
    const diff = matrixFrom(a.rows, a.cols, delta);

    const joint = randomOrthonormal(24, 6, new Rng(seedOf("basis-style", block)));
    const styleSpan = sliceCols(joint, 0, 3);
    const proj = matmulT(matmul(diff, styleSpan), styleSpan);
    let worst = 0;
    for (const v of proj.data) worst = Math.max(worst, Math.abs(v));
    expect(worst).toBeLessThan(1e-5);

    // sanity: the difference itself is not dust
    let scale = 0;
    for (const v of diff.data) scale = Math.max(scale, Math.abs(v));
    expect(scale).toBeGreaterThan(0.1);
  });

  it("rejects unknown block ids", () => {
    const m = model();
    expect(() => m.blockInfo("mid_block")).toThrow(ValidationError);
  });
});

describe("attention", () => {
  it("returns convex combinations: all-ones values map to all-ones output", () => {
    const m = model();
    const geom = m.blockInfo("up_blocks[3]");
    const f = m.computeFeatures("A road in the style of Van Gogh", "up_blocks[3]", 1, 0);
    const { q, k } = m.computeQkv("up_blocks[3]", f);
    const ones = matrixFrom(q.rows, q.cols, new Float64Array(q.rows * q.cols).fill(1));
    const out = m.attention(geom, { q, k, v: ones });
    for (const v of out.data) expect(Math.abs(v - 1)).toBeLessThan(1e-12);
  });
});

describe("inference", () => {
  it("renders a deterministic P5 image", () => {
    const m = model();
    const img1 = m.runInference("A river in the style of Van Gogh", 7);
    const img2 = m.runInference("A river in the style of Van Gogh", 7);
    expect(img1.equals(img2)).toBe(true);
    expect(img1.subarray(0, 3).toString("ascii")).toBe("P5\n");
    // 6x6 latent: header then 36 payload bytes
    const text = img1.toString("latin1");
    expect(text).toMatch(/^P5\n6 6\n255\n/);
    expect(img1.length).toBe("P5\n6 6\n255\n".length + 36);
  });

  it("different seeds render different images", () => {
    const m = model();
    const a = m.runInference("A river in the style of Van Gogh", 7);
    const b = m.runInference("A river in the style of Van Gogh", 8);
    expect(a.equals(b)).toBe(false);
  });
});
