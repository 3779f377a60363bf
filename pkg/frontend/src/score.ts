/**
 * Classify repaired feature tensors with the model back-end and write
 * the per-realization accuracy CSV the simulator's aggregate step joins
 * (`tensor_id,method,pb,lb,realization,top1,top5`).
 *
 * Input is a simulator output directory containing repaired_index.csv
 * plus the repaired tensors it lists, and the extract-step manifest that
 * maps tensor ids to true class labels.
 */

import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import {
  readManifestCsv,
  readRepairedIndex,
  writeAccuracyCsv,
  type AccuracyRow,
} from "./csv.js";
import { BridgeError } from "./errors.js";
import { loadModel } from "./modelio.js";
import { loadTensor } from "./npy.js";
import { splitAt } from "./split.js";

export interface ScoreOptions {
  modelDir: string;
  layer: string;
  tensorsDir: string;
  manifestPath: string;
  outPath: string;
}

export interface ScoreResult {
  rows: number;
  top1Rate: number;
  top5Rate: number;
}

function topIndices(probs: Float32Array, k: number): number[] {
  return Array.from(probs.keys())
    .sort((a, b) => probs[b] - probs[a])
    .slice(0, k);
}

export async function scoreRepaired(options: ScoreOptions): Promise<ScoreResult> {
  const manifest = await readManifestCsv(options.manifestPath);
  const labels = new Map(manifest.map((r) => [r.imageId, r.label]));
  const index = await readRepairedIndex(
    path.join(options.tensorsDir, "repaired_index.csv"),
  );
  if (index.length === 0) {
    throw new BridgeError(`no repaired tensors listed under ${options.tensorsDir}`);
  }
  const model = await loadModel(options.modelDir);
  const { back, featureShape } = splitAt(model, options.layer);

  const rows: AccuracyRow[] = [];
  let top1Hits = 0;
  let top5Hits = 0;
  for (const entry of index) {
    const label = labels.get(entry.tensorId);
    if (label === undefined) {
      throw new BridgeError(
        `tensor '${entry.tensorId}' from repaired_index.csv is not in ${options.manifestPath}`,
      );
    }
    const tensor = await loadTensor(path.join(options.tensorsDir, entry.path));
    if (
      tensor.shape[0] !== featureShape[0] ||
      tensor.shape[1] !== featureShape[1] ||
      tensor.shape[2] !== featureShape[2]
    ) {
      throw new BridgeError(
        `tensor '${entry.path}' has shape (${tensor.shape}), back-end expects (${featureShape})`,
      );
    }
    const probs = tf.tidy(() => {
      const x = tf.tensor4d(tensor.data, [1, ...tensor.shape]);
      return (back.predict(x) as tf.Tensor).dataSync() as Float32Array;
    });
    const top5 = topIndices(probs, 5);
    const top1 = top5[0] === label ? 1 : 0;
    const inTop5 = top5.includes(label) ? 1 : 0;
    top1Hits += top1;
    top5Hits += inTop5;
    rows.push({
      tensorId: entry.tensorId,
      method: entry.method,
      pb: entry.pb,
      lb: entry.lb,
      realization: entry.realization,
      top1,
      top5: inTop5,
    });
  }
  await writeAccuracyCsv(options.outPath, rows);
  return {
    rows: rows.length,
    top1Rate: top1Hits / rows.length,
    top5Rate: top5Hits / rows.length,
  };
}
