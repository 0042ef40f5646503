/** Triplet capture: run the three prompts through the synthetic runtime with
 * a shared seed and dump features and per-head Q/K/V per (prompt, block,
 * timestep) as DTF1 files, plus a manifest.
 *
 * The manifest's `pooled` section points at window-averaged feature triplets
 * per block, which feed the core CLI directly:
 *     dice align <anchor> <positive> <negative> --out A
 *     dice fit A --out S
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { AdapterConfig, blockDirName } from "./config.js";
import { writeMatrixFile } from "./dtf.js";
import { ValidationError } from "./errors.js";
import { Matrix, sliceCols, zeros } from "./linalg.js";
import { SyntheticDiffusionModel } from "./model.js";

export interface CaptureEntry {
  prompt_role: "anchor" | "positive" | "negative";
  block: string;
  timestep: number;
  role: "features" | "q" | "k" | "v";
  head: number | null; // null for features and full projections
  path: string; // relative to the capture out_dir
  dims: number[];
}

export interface CaptureManifest {
  hook: AdapterConfig["hook"];
  prompts: { anchor: string; positive: string; negative: string };
  blocks: Record<string, {
    dir: string;
    channels: number;
    heads: number;
    head_dim: number;
    latent: number;
    n_tokens: number;
  }>;
  timesteps: number[];
  entries: CaptureEntry[];
  pooled: Record<string, { anchor: string; positive: string; negative: string }>;
}

const PROMPT_ROLES = ["anchor", "positive", "negative"] as const;

export function runTripletCapture(cfg: AdapterConfig): string {
  if (cfg.prompts === undefined) {
    throw new ValidationError("capture requires a prompts section");
  }
  if (cfg.capture === undefined) {
    throw new ValidationError("capture requires a capture.out_dir");
  }
  const model = new SyntheticDiffusionModel(cfg.model);
  const outDir = cfg.capture.out_dir;
  const [lo, hi] = cfg.hook.timestep_window;
  const timesteps: number[] = [];
  for (let t = lo; t <= hi; t++) timesteps.push(t);
  const blocks = [...new Set([cfg.hook.style_block, cfg.hook.content_block])];
  const roles = cfg.hook.capture_roles;
  const wantQkv = roles.some((r) => r !== "features");

  const manifest: CaptureManifest = {
    hook: cfg.hook,
    prompts: cfg.prompts,
    blocks: {},
    timesteps,
    entries: [],
    pooled: {},
  };
  for (const block of blocks) {
    const geom = model.blockInfo(block);
    manifest.blocks[block] = {
      dir: blockDirName(block),
      channels: geom.channels,
      heads: geom.heads,
      head_dim: geom.channels / geom.heads,
      latent: geom.latent,
      n_tokens: geom.latent * geom.latent,
    };
  }

  const record = (
    promptRole: (typeof PROMPT_ROLES)[number],
    block: string,
    t: number,
    role: CaptureEntry["role"],
    head: number | null,
    rel: string,
    m: Matrix,
  ): void => {
    writeMatrixFile(path.join(outDir, rel), m);
    manifest.entries.push({
      prompt_role: promptRole, block, timestep: t, role, head,
      path: rel, dims: [m.rows, m.cols],
    });
  };

  for (const promptRole of PROMPT_ROLES) {
    const prompt = cfg.prompts[promptRole];
    for (const block of blocks) {
      const geom = model.blockInfo(block);
      const dir = blockDirName(block);
      const headDim = geom.channels / geom.heads;
      const pooled = zeros(geom.latent * geom.latent, geom.channels);

      for (const t of timesteps) {
        const base = `${promptRole}/${dir}/t${t}`;
        const features = model.computeFeatures(prompt, block, t, cfg.hook.seed);
        for (let i = 0; i < pooled.data.length; i++) pooled.data[i]! += features.data[i]!;
        if (roles.includes("features")) {
          record(promptRole, block, t, "features", null, `${base}/features.dtf`, features);
        }
        if (wantQkv) {
          const qkv = model.computeQkv(block, features);
          for (const role of ["q", "k", "v"] as const) {
            if (!roles.includes(role)) continue;
            const full = qkv[role];
            record(promptRole, block, t, role, null, `${base}/${role}.dtf`, full);
            for (let h = 0; h < geom.heads; h++) {
              const slice = sliceCols(full, h * headDim, (h + 1) * headDim);
              record(promptRole, block, t, role, h, `${base}/${role}_head${h}.dtf`, slice);
            }
          }
        }
      }

      if (roles.includes("features")) {
        for (let i = 0; i < pooled.data.length; i++) pooled.data[i]! /= timesteps.length;
        const rel = `pooled/${dir}/${promptRole}.dtf`;
        writeMatrixFile(path.join(outDir, rel), pooled);
        const slot = manifest.pooled[block] ?? { anchor: "", positive: "", negative: "" };
        slot[promptRole] = rel;
        manifest.pooled[block] = slot;
      }
    }
  }

  const manifestPath = path.join(outDir, "manifest.json");
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return manifestPath;
}

export function loadCaptureManifest(manifestPath: string): CaptureManifest {
  return JSON.parse(fs.readFileSync(manifestPath, "utf8")) as CaptureManifest;
}
