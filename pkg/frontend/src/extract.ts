/**
 * Run the model front-end over a directory of images and export the
 * feature tensors in the simulator's NPY dialect plus a manifest CSV.
 *
 * Images are float32 h×w×c NPY arrays (already decoded/preprocessed)
 * listed by an images.csv (image_id,image_file,label) in the directory.
 */

import { promises as fs } from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { readImagesCsv, writeManifestCsv, type ManifestRow } from "./csv.js";
import { BridgeError } from "./errors.js";
import { loadModel } from "./modelio.js";
import { loadTensor, saveTensor, type Tensor3 } from "./npy.js";
import { splitAt } from "./split.js";

export interface ExtractOptions {
  modelDir: string;
  layer: string;
  imagesDir: string;
  outDir: string;
}

export interface ExtractResult {
  manifestPath: string;
  tensorFiles: string[];
}

function toTensor3(t: tf.Tensor): Tensor3 {
  const squeezed = t.squeeze([0]);
  const shape = squeezed.shape;
  if (shape.length !== 3) {
    throw new BridgeError(`front-end produced rank-${shape.length} features, need h×w×c`);
  }
  const data = squeezed.dataSync() as Float32Array;
  squeezed.dispose();
  return { data: new Float32Array(data), shape: shape as [number, number, number] };
}

export async function extractFeatures(options: ExtractOptions): Promise<ExtractResult> {
  const images = await readImagesCsv(path.join(options.imagesDir, "images.csv"));
  if (images.length === 0) {
    throw new BridgeError(`no rows in ${path.join(options.imagesDir, "images.csv")}`);
  }
  const model = await loadModel(options.modelDir);
  const { front } = splitAt(model, options.layer);
  await fs.mkdir(options.outDir, { recursive: true });

  const rows: ManifestRow[] = [];
  const tensorFiles: string[] = [];
  for (const image of images) {
    const img = await loadTensor(path.join(options.imagesDir, image.imageFile));
    const features = tf.tidy(() => {
      const x = tf.tensor4d(img.data, [1, ...img.shape]);
      return front.predict(x) as tf.Tensor;
    });
    const out = toTensor3(features);
    features.dispose();
    const tensorFile = `${image.imageId}.npy`;
    await saveTensor(path.join(options.outDir, tensorFile), out);
    rows.push({ imageId: image.imageId, tensorFile, label: image.label });
    tensorFiles.push(tensorFile);
  }
  const manifestPath = path.join(options.outDir, "manifest.csv");
  await writeManifestCsv(manifestPath, rows);
  return { manifestPath, tensorFiles };
}
