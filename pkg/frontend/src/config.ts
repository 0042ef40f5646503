/** Adapter configuration: one JSON document, fail-closed on unknown keys.
 *
 * The `pipeline` object is not interpreted here; it is written verbatim to a
 * JSON file and handed to the core CLI via --config, which owns that schema
 * and rejects unknown keys itself.
 */

import * as fs from "node:fs";

import { FormatError, ValidationError } from "./errors.js";

export interface BlockGeom {
  channels: number;
  heads: number;
  latent: number; // square latent side; tokens = latent * latent
}

export interface PlantedStructure {
  r_style: number;
  r_content: number;
  noise_sigma: number;
}

export interface ModelConfig {
  total_steps: number;
  blocks: Record<string, BlockGeom>;
  planted: PlantedStructure;
}

export type CaptureRole = "features" | "q" | "k" | "v";

export interface HookConfig {
  style_block: string;
  content_block: string;
  timestep_window: [number, number]; // inclusive, within [0, total_steps)
  capture_roles: CaptureRole[];
  seed: number; // shared across the triplet so token grids stay aligned
}

export interface GuardConfig {
  prompt: string;
  subspace_root: string;
  image_out: string;
  work_dir: string;
  edit_path: "in-process" | "core";
  dual_path_check: boolean;
  edit_blocks: string[];
}

export interface AdapterConfig {
  core_cli: string[];
  model: ModelConfig;
  hook: HookConfig;
  prompts?: { anchor: string; positive: string; negative: string };
  pipeline: Record<string, unknown>;
  capture?: { out_dir: string };
  guard?: GuardConfig;
}

const TOP_KEYS = new Set(["core_cli", "model", "hook", "prompts", "pipeline", "capture", "guard"]);
const MODEL_KEYS = new Set(["total_steps", "blocks", "planted"]);
const BLOCK_KEYS = new Set(["channels", "heads", "latent"]);
const PLANTED_KEYS = new Set(["r_style", "r_content", "noise_sigma"]);
const HOOK_KEYS = new Set(["style_block", "content_block", "timestep_window", "capture_roles", "seed"]);
const PROMPT_KEYS = new Set(["anchor", "positive", "negative"]);
const CAPTURE_KEYS = new Set(["out_dir"]);
const GUARD_KEYS = new Set([
  "prompt", "subspace_root", "image_out", "work_dir",
  "edit_path", "dual_path_check", "edit_blocks",
]);
const ROLES: CaptureRole[] = ["features", "q", "k", "v"];

function rejectUnknown(obj: Record<string, unknown>, allowed: Set<string>, where: string): void {
  const unknown = Object.keys(obj).filter((k) => !allowed.has(k));
  if (unknown.length > 0) {
    throw new ValidationError(`${where}: unknown keys: ${unknown.sort().join(", ")}`);
  }
}

function asObject(v: unknown, where: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) {
    throw new ValidationError(`${where} must be a JSON object`);
  }
  return v as Record<string, unknown>;
}

function asInt(v: unknown, where: string, min: number): number {
  if (typeof v !== "number" || !Number.isInteger(v) || typeof v === "boolean") {
    throw new ValidationError(`${where} must be an integer`);
  }
  if (v < min) throw new ValidationError(`${where} must be >= ${min}, got ${v}`);
  return v;
}

function asString(v: unknown, where: string): string {
  if (typeof v !== "string" || v.length === 0) {
    throw new ValidationError(`${where} must be a non-empty string`);
  }
  return v;
}

/** Filesystem-safe directory name for a block id like "down_blocks[0]". */
export function blockDirName(block: string): string {
  const safe = block.replace(/[^A-Za-z0-9_.-]+/g, "_").replace(/^_+|_+$/g, "");
  if (safe.length === 0) throw new ValidationError(`block name ${JSON.stringify(block)} sanitizes to nothing`);
  return safe;
}

function parseModel(v: unknown): ModelConfig {
  const obj = asObject(v, "model");
  rejectUnknown(obj, MODEL_KEYS, "model");
  const totalSteps = asInt(obj.total_steps, "model.total_steps", 1);

  const blocksObj = asObject(obj.blocks, "model.blocks");
  const blocks: Record<string, BlockGeom> = {};
  const dirNames = new Set<string>();
  for (const [name, raw] of Object.entries(blocksObj)) {
    const b = asObject(raw, `model.blocks[${name}]`);
    rejectUnknown(b, BLOCK_KEYS, `model.blocks[${name}]`);
    const geom: BlockGeom = {
      channels: asInt(b.channels, `model.blocks[${name}].channels`, 1),
      heads: asInt(b.heads, `model.blocks[${name}].heads`, 1),
      latent: asInt(b.latent, `model.blocks[${name}].latent`, 1),
    };
    if (geom.channels % geom.heads !== 0) {
      throw new ValidationError(
        `model.blocks[${name}]: heads ${geom.heads} must divide channels ${geom.channels}`,
      );
    }
    const dir = blockDirName(name);
    if (dirNames.has(dir)) {
      throw new ValidationError(`model.blocks: names collide after sanitizing (${dir})`);
    }
    dirNames.add(dir);
    blocks[name] = geom;
  }
  if (Object.keys(blocks).length === 0) {
    throw new ValidationError("model.blocks must define at least one block");
  }

  const plantedObj = asObject(obj.planted ?? {}, "model.planted");
  rejectUnknown(plantedObj, PLANTED_KEYS, "model.planted");
  const sigmaRaw = plantedObj.noise_sigma ?? 0.02;
  if (typeof sigmaRaw !== "number" || !Number.isFinite(sigmaRaw) || sigmaRaw < 0) {
    throw new ValidationError("model.planted.noise_sigma must be a number >= 0");
  }
  const planted: PlantedStructure = {
    r_style: asInt(plantedObj.r_style ?? 3, "model.planted.r_style", 1),
    r_content: asInt(plantedObj.r_content ?? 3, "model.planted.r_content", 1),
    noise_sigma: sigmaRaw,
  };
  for (const [name, geom] of Object.entries(blocks)) {
    if (planted.r_style + planted.r_content > geom.channels) {
      throw new ValidationError(
        `model.planted ranks exceed channels of block ${name} (${geom.channels})`,
      );
    }
  }
  return { total_steps: totalSteps, blocks, planted };
}

function parseHook(v: unknown, model: ModelConfig): HookConfig {
  const obj = asObject(v ?? {}, "hook");
  rejectUnknown(obj, HOOK_KEYS, "hook");
  const hook: HookConfig = {
    style_block: asString(obj.style_block ?? "down_blocks[0]", "hook.style_block"),
    content_block: asString(obj.content_block ?? "up_blocks[3]", "hook.content_block"),
    timestep_window: [100, 400],
    capture_roles: ROLES.slice(),
    seed: asInt(obj.seed ?? 0, "hook.seed", 0),
  };
  if (obj.timestep_window !== undefined) {
    const w = obj.timestep_window;
    if (!Array.isArray(w) || w.length !== 2) {
      throw new ValidationError("hook.timestep_window must be [lo, hi]");
    }
    hook.timestep_window = [
      asInt(w[0], "hook.timestep_window[0]", 0),
      asInt(w[1], "hook.timestep_window[1]", 0),
    ];
  }
  const [lo, hi] = hook.timestep_window;
  if (lo > hi || hi >= model.total_steps) {
    throw new ValidationError(
      `hook.timestep_window [${lo}, ${hi}] must satisfy 0 <= lo <= hi < total_steps (${model.total_steps})`,
    );
  }
  if (obj.capture_roles !== undefined) {
    if (!Array.isArray(obj.capture_roles) || obj.capture_roles.length === 0) {
      throw new ValidationError("hook.capture_roles must be a non-empty array");
    }
    for (const r of obj.capture_roles) {
      if (!ROLES.includes(r as CaptureRole)) {
        throw new ValidationError(`hook.capture_roles: unknown role ${JSON.stringify(r)}`);
      }
    }
    hook.capture_roles = [...new Set(obj.capture_roles)] as CaptureRole[];
  }
  for (const which of ["style_block", "content_block"] as const) {
    if (!(hook[which] in model.blocks)) {
      throw new ValidationError(`hook.${which}: block ${JSON.stringify(hook[which])} not in model`);
    }
  }
  return hook;
}

function parseGuard(v: unknown, model: ModelConfig, hook: HookConfig): GuardConfig {
  const obj = asObject(v, "guard");
  rejectUnknown(obj, GUARD_KEYS, "guard");
  const guard: GuardConfig = {
    prompt: asString(obj.prompt, "guard.prompt"),
    subspace_root: asString(obj.subspace_root, "guard.subspace_root"),
    image_out: asString(obj.image_out, "guard.image_out"),
    work_dir: asString(obj.work_dir ?? "guard_work", "guard.work_dir"),
    edit_path: "in-process",
    dual_path_check: true,
    edit_blocks: [...new Set([hook.style_block, hook.content_block])],
  };
  if (obj.edit_path !== undefined) {
    if (obj.edit_path !== "in-process" && obj.edit_path !== "core") {
      throw new ValidationError(`guard.edit_path must be "in-process" or "core"`);
    }
    guard.edit_path = obj.edit_path;
  }
  if (obj.dual_path_check !== undefined) {
    if (typeof obj.dual_path_check !== "boolean") {
      throw new ValidationError("guard.dual_path_check must be a boolean");
    }
    guard.dual_path_check = obj.dual_path_check;
  }
  if (obj.edit_blocks !== undefined) {
    if (!Array.isArray(obj.edit_blocks) || obj.edit_blocks.length === 0) {
      throw new ValidationError("guard.edit_blocks must be a non-empty array");
    }
    guard.edit_blocks = obj.edit_blocks.map((b, i) => asString(b, `guard.edit_blocks[${i}]`));
  }
  for (const b of guard.edit_blocks) {
    if (!(b in model.blocks)) {
      throw new ValidationError(`guard.edit_blocks: block ${JSON.stringify(b)} not in model`);
    }
  }
  // the reference is the file round-trip: in-process editing without the
  // cross-check would make the adapter a second source of truth
  if (guard.edit_path === "in-process" && !guard.dual_path_check) {
    throw new ValidationError(
      'guard.edit_path "in-process" requires guard.dual_path_check true',
    );
  }
  return guard;
}

export function parseConfig(raw: unknown): AdapterConfig {
  const obj = asObject(raw, "config");
  rejectUnknown(obj, TOP_KEYS, "config");

  let coreCli = ["dice"];
  if (obj.core_cli !== undefined) {
    if (!Array.isArray(obj.core_cli) || obj.core_cli.length === 0) {
      throw new ValidationError("core_cli must be a non-empty argv array");
    }
    coreCli = obj.core_cli.map((p, i) => asString(p, `core_cli[${i}]`));
  }

  const model = parseModel(obj.model);
  const hook = parseHook(obj.hook, model);

  const cfg: AdapterConfig = {
    core_cli: coreCli,
    model,
    hook,
    pipeline: obj.pipeline === undefined ? {} : asObject(obj.pipeline, "pipeline"),
  };

  if (obj.prompts !== undefined) {
    const p = asObject(obj.prompts, "prompts");
    rejectUnknown(p, PROMPT_KEYS, "prompts");
    cfg.prompts = {
      anchor: asString(p.anchor, "prompts.anchor"),
      positive: asString(p.positive, "prompts.positive"),
      negative: asString(p.negative, "prompts.negative"),
    };
  }
  if (obj.capture !== undefined) {
    const c = asObject(obj.capture, "capture");
    rejectUnknown(c, CAPTURE_KEYS, "capture");
    cfg.capture = { out_dir: asString(c.out_dir, "capture.out_dir") };
  }
  if (obj.guard !== undefined) {
    cfg.guard = parseGuard(obj.guard, model, hook);
  }
  return cfg;
}

export function loadConfig(filePath: string): AdapterConfig {
  let text: string;
  try {
    text = fs.readFileSync(filePath, "utf8");
  } catch (err) {
    throw new FormatError(`${filePath}: cannot read config: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new FormatError(`${filePath}: bad JSON: ${(err as Error).message}`);
  }
  return parseConfig(raw);
}
