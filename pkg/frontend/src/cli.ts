#!/usr/bin/env node
/** dice-adapter CLI.
 *
 *   dice-adapter capture --config <path>   triplet capture to DTF1 + manifest
 *   dice-adapter guard   --config <path>   guarded inference with dual-path
 *                                          verified Q/K/V editing
 *
 * Exit codes: 0 success, 1 dual-path divergence, 2 validation,
 * 3 I/O or format, 4 core CLI failure.
 */

import { parseArgs } from "node:util";

import { runTripletCapture } from "./capture.js";
import { loadConfig } from "./config.js";
import { ValidationError, exitCodeFor } from "./errors.js";
import { runGuardedInference } from "./guard.js";

export function main(argv: string[]): number {
  let parsed: ReturnType<typeof parseArgs>;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        config: { type: "string" },
        verbose: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error(`ValidationError: ${(err as Error).message}`);
    return 2;
  }

  try {
    const [command, ...extra] = parsed.positionals;
    if (command !== "capture" && command !== "guard") {
      throw new ValidationError(
        `usage: dice-adapter <capture|guard> --config <path> (got ${JSON.stringify(command ?? "")})`,
      );
    }
    if (extra.length > 0) {
      throw new ValidationError(`unexpected arguments: ${extra.join(" ")}`);
    }
    if (parsed.values.config === undefined) {
      throw new ValidationError("--config <path> is required");
    }
    const cfg = loadConfig(parsed.values.config as string);

    if (command === "capture") {
      const manifestPath = runTripletCapture(cfg);
      console.log(`capture manifest -> ${manifestPath}`);
    } else {
      const result = runGuardedInference(cfg);
      const checked = result.layers.filter((l) => l.max_abs_diff !== null);
      if (checked.length > 0) {
        const worst = Math.max(...checked.map((l) => l.max_abs_diff!));
        console.log(
          `dual-path check: ${checked.length} layers, worst |diff| ${worst.toExponential(3)}`,
        );
      }
      console.log(`image -> ${result.imagePath}`);
      console.log(`edit log -> ${result.logPath}`);
    }
    return 0;
  } catch (err) {
    const e = err as Error;
    console.error(`${e.name}: ${e.message}`);
    return exitCodeFor(err);
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
