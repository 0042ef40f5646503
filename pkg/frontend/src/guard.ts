/** Guarded inference: re-run the sampler and rewrite Q/K/V at the configured
 * blocks through the editing rules, verifying the in-process path against
 * the core CLI on the dumped tensors at every edited layer.
 *
 * The file round-trip through the core is the reference. The in-process
 * mirror exists to keep the hot loop in one process, and it is only legal
 * while the dual-path check is on: any divergence past tolerance aborts the
 * run with a diagnostic dump instead of producing an image from unverified
 * edits.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { AdapterConfig, GuardConfig, blockDirName } from "./config.js";
import { coreEdit } from "./core.js";
import { writeMatrixFile } from "./dtf.js";
import {
  SubspaceTs,
  applyEdit,
  editParamsFromPipeline,
  loadSubspace,
} from "./edit.js";
import { DualPathError, ValidationError } from "./errors.js";
import { maxAbsDiff } from "./linalg.js";
import { Qkv, SyntheticDiffusionModel } from "./model.js";

export const DUAL_PATH_TOL = 1e-5;

export interface LayerLogEntry {
  block: string;
  timestep: number;
  max_abs_diff: number | null; // null when the check is off
}

export interface GuardResult {
  imagePath: string;
  logPath: string;
  layers: LayerLogEntry[];
}

export interface BlockSubspaces {
  style: SubspaceTs;
  content: SubspaceTs;
}

export function loadBlockSubspaces(
  guard: GuardConfig,
  block: string,
  channels: number,
): BlockSubspaces {
  const dir = path.join(guard.subspace_root, blockDirName(block));
  const style = loadSubspace(path.join(dir, "style_subspace.dtf"));
  const content = loadSubspace(path.join(dir, "content_subspace.dtf"));
  if (style.kind !== "style" || content.kind !== "content") {
    throw new ValidationError(`${dir}: subspace kinds are swapped or mislabeled`);
  }
  for (const [name, sub] of Object.entries({ style, content })) {
    if (sub.basis.rows !== channels) {
      throw new ValidationError(
        `${dir}: ${name} subspace dim ${sub.basis.rows} vs block channels ${channels}`,
      );
    }
  }
  return { style, content };
}

function dumpDivergence(
  layerDir: string,
  block: string,
  t: number,
  inproc: Qkv,
  core: Qkv,
  diffs: Record<string, number>,
): string {
  const diagDir = path.join(layerDir, "divergence");
  fs.mkdirSync(diagDir, { recursive: true });
  for (const role of ["q", "k", "v"] as const) {
    writeMatrixFile(path.join(diagDir, `inprocess_${role}.dtf`), inproc[role]);
    writeMatrixFile(path.join(diagDir, `core_${role}.dtf`), core[role]);
  }
  fs.writeFileSync(
    path.join(diagDir, "report.json"),
    JSON.stringify(
      { block, timestep: t, tolerance: DUAL_PATH_TOL, max_abs_diff: diffs },
      null,
      2,
    ) + "\n",
  );
  return diagDir;
}

export interface DualPathOptions {
  coreCli: string[];
  layerDir: string;
  subspaceDir: string; // what the core reads
  pipelineConfigPath: string | null;
  editPath: "in-process" | "core";
  check: boolean;
}

export interface DualPathOutcome {
  chosen: Qkv;
  maxDiff: number | null;
}

/** Edit one layer both ways and cross-check; aborts on divergence.
 * `pair` is what the in-process mirror uses; the core reads `subspaceDir`. */
export function dualPathEdit(
  block: string,
  t: number,
  qkv: Qkv,
  pair: BlockSubspaces,
  params: ReturnType<typeof editParamsFromPipeline>,
  opts: DualPathOptions,
): DualPathOutcome {
  const coreResult = coreEdit(opts.coreCli, opts.layerDir, qkv, opts.subspaceDir, opts.pipelineConfigPath);
  let chosen = coreResult;
  let maxDiff: number | null = null;

  if (opts.editPath === "in-process" || opts.check) {
    const inproc = applyEdit(qkv, pair.style, pair.content, params);
    if (opts.check) {
      const diffs = {
        q: maxAbsDiff(inproc.q, coreResult.q),
        k: maxAbsDiff(inproc.k, coreResult.k),
        v: maxAbsDiff(inproc.v, coreResult.v),
      };
      maxDiff = Math.max(diffs.q, diffs.k, diffs.v);
      if (maxDiff > DUAL_PATH_TOL) {
        const diagDir = dumpDivergence(opts.layerDir, block, t, inproc, coreResult, diffs);
        throw new DualPathError(
          `dual-path divergence at ${block} t=${t}: max |diff| ${maxDiff.toExponential(3)} ` +
          `> ${DUAL_PATH_TOL} (diagnostics in ${diagDir})`,
          diagDir,
        );
      }
    }
    if (opts.editPath === "in-process") chosen = inproc;
  }
  return { chosen, maxDiff };
}

export function runGuardedInference(cfg: AdapterConfig): GuardResult {
  if (cfg.guard === undefined) {
    throw new ValidationError("guard requires a guard section");
  }
  const guard = cfg.guard;
  const model = new SyntheticDiffusionModel(cfg.model);
  const params = editParamsFromPipeline(cfg.pipeline);

  const subspaces = new Map<string, BlockSubspaces>();
  for (const block of guard.edit_blocks) {
    subspaces.set(block, loadBlockSubspaces(guard, block, model.blockInfo(block).channels));
  }

  fs.mkdirSync(guard.work_dir, { recursive: true });
  const pipelinePath = path.join(guard.work_dir, "core_config.json");
  fs.writeFileSync(pipelinePath, JSON.stringify(cfg.pipeline, null, 2) + "\n");

  const layers: LayerLogEntry[] = [];
  const hook = {
    blocks: new Set(guard.edit_blocks),
    edit: (block: string, t: number, qkv: Qkv): Qkv => {
      const pair = subspaces.get(block)!;
      const { chosen, maxDiff } = dualPathEdit(block, t, qkv, pair, params, {
        coreCli: cfg.core_cli,
        layerDir: path.join(guard.work_dir, "layers", blockDirName(block), `t${t}`),
        subspaceDir: path.join(guard.subspace_root, blockDirName(block)),
        pipelineConfigPath: pipelinePath,
        editPath: guard.edit_path,
        check: guard.dual_path_check,
      });
      layers.push({ block, timestep: t, max_abs_diff: maxDiff });
      return chosen;
    },
  };

  const image = model.runInference(guard.prompt, cfg.hook.seed, hook);
  fs.mkdirSync(path.dirname(path.resolve(guard.image_out)), { recursive: true });
  fs.writeFileSync(guard.image_out, image);

  const logPath = path.join(guard.work_dir, "edit_log.json");
  fs.writeFileSync(
    logPath,
    JSON.stringify(
      {
        edit_path: guard.edit_path,
        dual_path_check: guard.dual_path_check,
        tolerance: DUAL_PATH_TOL,
        layers,
      },
      null,
      2,
    ) + "\n",
  );
  return { imagePath: guard.image_out, logPath, layers };
}
