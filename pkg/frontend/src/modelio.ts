/**
 * Save/load tfjs layers models as a plain directory (model.json +
 * weights.bin, the standard layers-model layout) using only node:fs, so
 * no native tfjs-node binding is required.
 */

import { promises as fs } from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { BridgeError } from "./errors.js";

function joinWeightData(data: ArrayBuffer | ArrayBuffer[]): Buffer {
  const parts = Array.isArray(data) ? data : [data];
  return Buffer.concat(parts.map((p) => Buffer.from(p)));
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  await fs.mkdir(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      if (artifacts.weightData == null || artifacts.weightSpecs == null) {
        throw new BridgeError("model serialization produced no weights");
      }
      const manifest = {
        format: "layers-model",
        modelTopology: artifacts.modelTopology,
        weightsManifest: [
          { paths: ["weights.bin"], weights: artifacts.weightSpecs },
        ],
      };
      await fs.writeFile(path.join(dir, "model.json"), JSON.stringify(manifest));
      await fs.writeFile(
        path.join(dir, "weights.bin"),
        joinWeightData(artifacts.weightData as ArrayBuffer | ArrayBuffer[]),
      );
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: "JSON" as const,
        },
      };
    }),
  );
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const manifestPath = path.join(dir, "model.json");
  let manifest: {
    modelTopology?: object;
    weightsManifest?: { paths: string[]; weights: tf.io.WeightsManifestEntry[] }[];
  };
  try {
    manifest = JSON.parse(await fs.readFile(manifestPath, "utf8"));
  } catch (err) {
    throw new BridgeError(`cannot read model manifest ${manifestPath}: ${err}`);
  }
  if (manifest.modelTopology == null || manifest.weightsManifest == null) {
    throw new BridgeError(`${manifestPath} is not a layers-model manifest`);
  }
  const weightSpecs = manifest.weightsManifest.flatMap((g) => g.weights);
  const buffers: Buffer[] = [];
  for (const group of manifest.weightsManifest) {
    for (const rel of group.paths) {
      buffers.push(await fs.readFile(path.join(dir, rel)));
    }
  }
  const joined = Buffer.concat(buffers);
  const weightData = joined.buffer.slice(
    joined.byteOffset,
    joined.byteOffset + joined.byteLength,
  );
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs,
      weightData,
    }),
  );
}
