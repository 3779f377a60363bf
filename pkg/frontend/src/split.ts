/**
 * Split a classification model at a named layer into a front-end
 * (input → features) and a back-end (features → class probabilities).
 *
 * The split layer must be a single-connection point: every layer after
 * it may depend only on tensors computed at or after the split, so the
 * feature map is the one tensor crossing the boundary. Residual or
 * branching blocks entirely behind the split are rebuilt faithfully;
 * skip connections reaching across the boundary are rejected, and a
 * rejected split leaves the model graph untouched. A successful split
 * returns a back-end that shares layers (and weights) with the original
 * model, so split each loaded model at most once.
 */

import * as tf from "@tensorflow/tfjs";

import { SplitError } from "./errors.js";

export interface SplitModel {
  front: tf.LayersModel;
  back: tf.LayersModel;
  /** Feature shape crossing the boundary, without the batch dim. */
  featureShape: number[];
}

export function splitAt(model: tf.LayersModel, layerName: string): SplitModel {
  const layers = model.layers;
  const idx = layers.findIndex((l) => l.name === layerName);
  if (idx < 0) {
    const names = layers.map((l) => l.name).join(", ");
    throw new SplitError(`model has no layer named '${layerName}' (layers: ${names})`);
  }
  if (model.outputs.length !== 1) {
    throw new SplitError("only single-output models can be split");
  }
  // Snapshot the original graph before apply() below adds replay nodes.
  const originalNodes = layers.map((l) => l.inboundNodes.slice());
  const outboundCounts = layers.map((l) => l.outboundNodes.length);
  if (originalNodes[idx].length !== 1) {
    throw new SplitError(
      `layer '${layerName}' is used ${originalNodes[idx].length} times; not a split point`,
    );
  }
  const boundary = layers[idx].output as tf.SymbolicTensor;
  const front = tf.model({
    inputs: model.inputs,
    outputs: boundary,
    name: `${model.name}_front`,
  });

  const featureShape = boundary.shape.slice(1).map((d) => {
    if (d == null || d <= 0) {
      throw new SplitError(`feature shape ${boundary.shape} is not fully static`);
    }
    return d;
  });
  const feed = tf.input({ shape: featureShape, name: `${layerName}_feed` });
  const mapped = new Map<string, tf.SymbolicTensor>();
  mapped.set(boundary.name, feed);

  try {
    for (let i = idx + 1; i < layers.length; i++) {
      const layer = layers[i];
      const nodes = originalNodes[i];
      if (nodes.length !== 1) {
        throw new SplitError(
          `layer '${layer.name}' is shared across the split; cannot rebuild the back-end`,
        );
      }
      const sources = nodes[0].inputTensors as tf.SymbolicTensor[];
      const inputs = sources.map((s) => {
        const replay = mapped.get(s.name);
        if (replay === undefined) {
          throw new SplitError(
            `layer '${layer.name}' consumes '${s.name}' from before the split; ` +
              `'${layerName}' does not have a single downstream connection`,
          );
        }
        return replay;
      });
      const applied = layer.apply(inputs.length === 1 ? inputs[0] : inputs);
      const outputs = Array.isArray(applied)
        ? (applied as tf.SymbolicTensor[])
        : [applied as tf.SymbolicTensor];
      const originals = nodes[0].outputTensors as tf.SymbolicTensor[];
      originals.forEach((t, j) => mapped.set(t.name, outputs[j]));
    }

    const finalName = (model.outputs[0] as tf.SymbolicTensor).name;
    const finalOut = mapped.get(finalName);
    if (finalOut === undefined) {
      throw new SplitError(
        `model output '${finalName}' is produced at or before '${layerName}'; nothing to split`,
      );
    }
    const back = tf.model({
      inputs: feed,
      outputs: finalOut,
      name: `${model.name}_back`,
    });
    return { front, back, featureShape };
  } catch (err) {
    // Drop the partially replayed nodes so a failed split leaves the
    // model graph exactly as it was.
    layers.forEach((l, j) => {
      l.inboundNodes.length = originalNodes[j].length;
      l.outboundNodes.length = outboundCounts[j];
    });
    throw err;
  }
}
