/**
 * A small deterministic image classifier for smoke tests and demos:
 * conv stem, one residual block, a clean single-connection split point
 * (`features`), then another residual block and a softmax head behind
 * it. All weights are seeded, so the same seed gives the same model.
 */

import * as tf from "@tensorflow/tfjs";

export interface DemoModelOptions {
  inputSize?: number;
  channels?: number;
  classes?: number;
  seed?: number;
}

export function buildDemoModel(options: DemoModelOptions = {}): tf.LayersModel {
  const { inputSize = 16, channels = 3, classes = 10, seed = 7 } = options;
  let next = seed;
  const conv = (filters: number, name: string, activation?: "relu") =>
    tf.layers.conv2d({
      filters,
      kernelSize: 3,
      padding: "same",
      activation,
      name,
      kernelInitializer: tf.initializers.glorotUniform({ seed: next++ }),
    });

  const input = tf.input({ shape: [inputSize, inputSize, channels], name: "image" });
  const stem = conv(8, "stem", "relu").apply(input) as tf.SymbolicTensor;
  // residual block in front of the split point
  const a1 = conv(8, "front_a", "relu").apply(stem) as tf.SymbolicTensor;
  const a2 = conv(8, "front_b").apply(a1) as tf.SymbolicTensor;
  const aSum = tf.layers.add({ name: "front_add" }).apply([stem, a2]) as tf.SymbolicTensor;
  const features = tf.layers
    .activation({ activation: "relu", name: "features" })
    .apply(aSum) as tf.SymbolicTensor;
  // residual block entirely behind the split point
  const b1 = conv(8, "back_a", "relu").apply(features) as tf.SymbolicTensor;
  const b2 = conv(8, "back_b").apply(b1) as tf.SymbolicTensor;
  const bSum = tf.layers.add({ name: "back_add" }).apply([features, b2]) as tf.SymbolicTensor;
  const pooled = tf.layers
    .globalAveragePooling2d({ name: "pool" })
    .apply(bSum) as tf.SymbolicTensor;
  const probs = tf.layers
    .dense({
      units: classes,
      activation: "softmax",
      name: "probs",
      kernelInitializer: tf.initializers.glorotUniform({ seed: next++ }),
    })
    .apply(pooled) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: probs, name: "demo_classifier" });
}
