/** Subprocess bridge to the core CLI. The adapter talks to the core only
 * through this file interface: DTF1 tensors in, DTF1 tensors out. */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

import { writeMatrixFile, readMatrixFile } from "./dtf.js";
import { CoreCliError } from "./errors.js";
import { Qkv } from "./model.js";

export function runCore(coreCli: string[], args: string[]): string {
  const [cmd, ...prefix] = coreCli;
  try {
    return execFileSync(cmd!, [...prefix, ...args], {
      encoding: "utf8",
      stdio: ["ignore", "pipe", "pipe"],
      maxBuffer: 64 * 1024 * 1024,
    });
  } catch (err) {
    const e = err as NodeJS.ErrnoException & { status?: number; stderr?: string };
    const detail = (e.stderr ?? e.message ?? "").toString().trim().split("\n").slice(-3).join("\n");
    throw new CoreCliError(
      `core CLI failed (${coreCli.join(" ")} ${args.join(" ")}): ${detail}`,
      e.status ?? null,
    );
  }
}

/** Run the core's edit on a Q/K/V triple via files; returns the edited triple.
 * workDir receives the dumped inputs, the manifest, and the core's outputs. */
export function coreEdit(
  coreCli: string[],
  workDir: string,
  qkv: Qkv,
  subspaceDir: string,
  pipelineConfigPath: string | null,
): Qkv {
  fs.mkdirSync(workDir, { recursive: true });
  writeMatrixFile(path.join(workDir, "q.dtf"), qkv.q);
  writeMatrixFile(path.join(workDir, "k.dtf"), qkv.k);
  writeMatrixFile(path.join(workDir, "v.dtf"), qkv.v);
  const manifestPath = path.join(workDir, "qkv_manifest.json");
  fs.writeFileSync(
    manifestPath,
    JSON.stringify({ q: "q.dtf", k: "k.dtf", v: "v.dtf" }, null, 2) + "\n",
  );
  const outDir = path.join(workDir, "core_out");
  const args = ["edit", manifestPath, subspaceDir, "--out", outDir];
  if (pipelineConfigPath !== null) args.push("--config", pipelineConfigPath);
  runCore(coreCli, args);
  return {
    q: readMatrixFile(path.join(outDir, "q_edited.dtf")),
    k: readMatrixFile(path.join(outDir, "k_edited.dtf")),
    v: readMatrixFile(path.join(outDir, "v_edited.dtf")),
  };
}

/** Align a pooled triplet and fit subspaces with the core CLI. */
export function coreAlignFit(
  coreCli: string[],
  triplet: { anchor: string; positive: string; negative: string },
  alignedDir: string,
  subspaceDir: string,
  pipelineConfigPath: string | null,
): void {
  runCore(coreCli, [
    "align", triplet.anchor, triplet.positive, triplet.negative, "--out", alignedDir,
  ]);
  const fitArgs = ["fit", alignedDir, "--out", subspaceDir];
  if (pipelineConfigPath !== null) fitArgs.push("--config", pipelineConfigPath);
  runCore(coreCli, fitArgs);
}
