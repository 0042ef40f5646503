export {
  ValidationError,
  FormatError,
  CoreCliError,
  DualPathError,
  exitCodeFor,
} from "./errors.js";
export { Rng, fnv1a, seedOf } from "./prng.js";
export {
  Matrix,
  matrixFrom,
  zeros,
  clone,
  matmul,
  matmulT,
  sliceCols,
  maxAbsDiff,
  randomOrthonormal,
  quantizeF32,
} from "./linalg.js";
export {
  Tensor,
  encodeTensor,
  decodeTensor,
  readTensorFile,
  writeTensorFile,
  readMatrixFile,
  writeMatrixFile,
} from "./dtf.js";
export {
  AdapterConfig,
  BlockGeom,
  HookConfig,
  GuardConfig,
  ModelConfig,
  CaptureRole,
  parseConfig,
  loadConfig,
  blockDirName,
} from "./config.js";
export { SyntheticDiffusionModel, promptKeys, renderPgm, Qkv, EditHook } from "./model.js";
export {
  AecParams,
  EditParams,
  SubspaceTs,
  AEC_DEFAULTS,
  EDIT_DEFAULTS,
  editParamsFromPipeline,
  loadSubspace,
  projectRows,
  styleScores,
  normalizeScores,
  computeGamma,
  suppressStyle,
  enhanceContent,
  applyEdit,
} from "./edit.js";
export { runCore, coreEdit, coreAlignFit } from "./core.js";
export { runTripletCapture, loadCaptureManifest, CaptureManifest, CaptureEntry } from "./capture.js";
export {
  runGuardedInference,
  dualPathEdit,
  loadBlockSubspaces,
  BlockSubspaces,
  DualPathOptions,
  DualPathOutcome,
  GuardResult,
  LayerLogEntry,
  DUAL_PATH_TOL,
} from "./guard.js";
