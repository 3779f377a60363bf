export { BridgeError, CsvFormatError, NpyFormatError, SplitError } from "./errors.js";
export {
  loadTensor,
  readTensorBytes,
  saveTensor,
  writeTensorBytes,
  type Tensor3,
} from "./npy.js";
export {
  readImagesCsv,
  readManifestCsv,
  readRepairedIndex,
  writeAccuracyCsv,
  writeManifestCsv,
  type AccuracyRow,
  type ImageRow,
  type ManifestRow,
  type RepairedRow,
} from "./csv.js";
export { loadModel, saveModel } from "./modelio.js";
export { splitAt, type SplitModel } from "./split.js";
export { buildDemoModel, type DemoModelOptions } from "./demo.js";
export { extractFeatures, type ExtractOptions, type ExtractResult } from "./extract.js";
export { scoreRepaired, type ScoreOptions, type ScoreResult } from "./score.js";
