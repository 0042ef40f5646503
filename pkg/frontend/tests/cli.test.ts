import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { blockDirName, coreAlignFit, loadCaptureManifest } from "../src/index.js";
import { PIPELINE, baseRaw, tmpDir } from "./helpers.js";

const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));

function run(args: string[]): { status: number | null; stdout: string; stderr: string } {
  const r = spawnSync(process.execPath, [CLI, ...args], {
    encoding: "utf8",
    env: { ...process.env, DICE_NUMBA: "0" },
  });
  return { status: r.status, stdout: r.stdout, stderr: r.stderr };
}

/** Small three-step variant so guard spawns only six core edits. */
function smallRaw(root: string): Record<string, unknown> {
  const raw = baseRaw(root);
  (raw.model as Record<string, unknown>).total_steps = 3;
  (raw.hook as Record<string, unknown>).timestep_window = [1, 2];
  return raw;
}

function writeConfig(root: string, raw: unknown): string {
  const p = path.join(root, "adapter.json");
  fs.writeFileSync(p, JSON.stringify(raw, null, 2));
  return p;
}

let root: string;
let configPath: string;

beforeAll(() => {
  root = tmpDir("cli-");
  configPath = writeConfig(root, smallRaw(root));
});

describe("argument handling", () => {
  it("rejects unknown commands", () => {
    const r = run(["transmogrify", "--config", configPath]);
    expect(r.status).toBe(2);
    expect(r.stderr).toMatch(/usage: dice-adapter/);
  });

  it("requires --config", () => {
    const r = run(["capture"]);
    expect(r.status).toBe(2);
    expect(r.stderr).toMatch(/--config <path> is required/);
  });

  it("rejects unknown flags", () => {
    const r = run(["capture", "--config", configPath, "--frobnicate"]);
    expect(r.status).toBe(2);
  });

  it("maps unreadable configs to exit 3", () => {
    const bad = path.join(root, "mangled.json");
    fs.writeFileSync(bad, "{ nope");
    expect(run(["capture", "--config", bad]).status).toBe(3);
    expect(run(["capture", "--config", path.join(root, "missing.json")]).status).toBe(3);
  });

  it("maps config schema violations to exit 2", () => {
    const raw = smallRaw(root) as Record<string, unknown>;
    raw.surprise = 1;
    const p = path.join(root, "unknown-key.json");
    fs.writeFileSync(p, JSON.stringify(raw));
    const r = run(["capture", "--config", p]);
    expect(r.status).toBe(2);
    expect(r.stderr).toMatch(/unknown keys: surprise/);
  });
});

describe("capture and guard", () => {
  it("captures, then guards once subspaces are fitted", () => {
    const cap = run(["capture", "--config", configPath]);
    expect(cap.stderr).toBe("");
    expect(cap.status).toBe(0);
    const m = cap.stdout.match(/^capture manifest -> (.+)$/m);
    expect(m).not.toBeNull();
    const manifestPath = m![1]!;
    expect(fs.existsSync(manifestPath)).toBe(true);

    // guard before fit: subspace files are missing
    const early = run(["guard", "--config", configPath]);
    expect(early.status).toBe(3);
    expect(early.stderr).toMatch(/FormatError/);

    const manifest = loadCaptureManifest(manifestPath);
    const captureDir = path.dirname(manifestPath);
    const pipelinePath = path.join(root, "pipeline.json");
    fs.writeFileSync(pipelinePath, JSON.stringify(PIPELINE));
    const guard = (smallRaw(root) as { guard: Record<string, string> }).guard;
    for (const block of Object.keys(manifest.blocks)) {
      const dir = blockDirName(block);
      const pooled = manifest.pooled[block]!;
      coreAlignFit(
        ["dice"],
        {
          anchor: path.join(captureDir, pooled.anchor),
          positive: path.join(captureDir, pooled.positive),
          negative: path.join(captureDir, pooled.negative),
        },
        path.join(root, "aligned", dir),
        path.join(guard.subspace_root!, dir),
        pipelinePath,
      );
    }

    const r = run(["guard", "--config", configPath]);
    expect(r.stderr).toBe("");
    expect(r.status).toBe(0);
    expect(r.stdout).toMatch(/dual-path check: 6 layers, worst \|diff\| \d/);
    expect(r.stdout).toMatch(/^image -> /m);
    expect(r.stdout).toMatch(/^edit log -> /m);

    const img = r.stdout.match(/^image -> (.+)$/m)![1]!;
    expect(fs.readFileSync(img).subarray(0, 3).toString("ascii")).toBe("P5\n");
  });
});
