/** Error taxonomy; each class maps to one CLI exit code. */

export class ValidationError extends Error {
  override name = "ValidationError";
}

export class FormatError extends Error {
  override name = "FormatError";
}

/** The core CLI returned a nonzero exit or could not be spawned. */
export class CoreCliError extends Error {
  override name = "CoreCliError";
  constructor(message: string, public readonly exitCode: number | null = null) {
    super(message);
  }
}

/** In-process edit diverged from the core reference past tolerance. */
export class DualPathError extends Error {
  override name = "DualPathError";
  constructor(message: string, public readonly diagnosticDir: string) {
    super(message);
  }
}

export const EXIT_OK = 0;
export const EXIT_DIVERGENCE = 1;
export const EXIT_VALIDATION = 2;
export const EXIT_IO = 3;
export const EXIT_CORE = 4;

export function exitCodeFor(err: unknown): number {
  if (err instanceof DualPathError) return EXIT_DIVERGENCE;
  if (err instanceof ValidationError) return EXIT_VALIDATION;
  if (err instanceof FormatError) return EXIT_IO;
  if (err instanceof CoreCliError) return EXIT_CORE;
  return EXIT_IO;
}
