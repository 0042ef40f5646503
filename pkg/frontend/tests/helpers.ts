import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import {
  AdapterConfig,
  CaptureManifest,
  blockDirName,
  coreAlignFit,
  loadCaptureManifest,
  parseConfig,
  runTripletCapture,
} from "../src/index.js";

// keep spawned core processes on the numpy backend; jit warmup would dominate
process.env.DICE_NUMBA = "0";

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export const PIPELINE = {
  lambda: 1.0,
  epsilon_rel: 0.05,
  r_style: 2,
  r_content: 2,
  gamma_q: 0.25,
};

/** Raw JSON config for a small two-block model; tests override pieces of it. */
export function baseRaw(root: string): Record<string, unknown> {
  return {
    core_cli: ["dice"],
    model: {
      total_steps: 6,
      blocks: {
        "down_blocks[0]": { channels: 24, heads: 4, latent: 6 },
        "up_blocks[3]": { channels: 16, heads: 2, latent: 6 },
      },
      planted: { r_style: 3, r_content: 3, noise_sigma: 0.02 },
    },
    hook: { timestep_window: [2, 4], seed: 7 },
    prompts: {
      anchor: "A road in the style of Van Gogh",
      positive: "A flower in the style of Van Gogh",
      negative: "A road in the style of Monet",
    },
    pipeline: { ...PIPELINE },
    capture: { out_dir: path.join(root, "capture") },
    guard: {
      prompt: "A river in the style of Van Gogh",
      subspace_root: path.join(root, "subspaces"),
      image_out: path.join(root, "guarded.pgm"),
      work_dir: path.join(root, "guard_work"),
    },
  };
}

export function baseConfig(root: string): AdapterConfig {
  return parseConfig(baseRaw(root));
}

export interface Prepared {
  cfg: AdapterConfig;
  manifestPath: string;
  manifest: CaptureManifest;
  captureDir: string;
  pipelinePath: string;
}

/** Capture the triplet, then align+fit per edit block into guard.subspace_root. */
export function captureAndFit(root: string): Prepared {
  const cfg = baseConfig(root);
  const manifestPath = runTripletCapture(cfg);
  const manifest = loadCaptureManifest(manifestPath);
  const captureDir = path.dirname(manifestPath);
  const pipelinePath = path.join(root, "pipeline.json");
  fs.writeFileSync(pipelinePath, JSON.stringify(cfg.pipeline, null, 2) + "\n");
  for (const block of cfg.guard!.edit_blocks) {
    const dir = blockDirName(block);
    const pooled = manifest.pooled[block]!;
    coreAlignFit(
      cfg.core_cli,
      {
        anchor: path.join(captureDir, pooled.anchor),
        positive: path.join(captureDir, pooled.positive),
        negative: path.join(captureDir, pooled.negative),
      },
      path.join(root, "aligned", dir),
      path.join(cfg.guard!.subspace_root, dir),
      pipelinePath,
    );
  }
  return { cfg, manifestPath, manifest, captureDir, pipelinePath };
}
