#!/usr/bin/env node
/**
 * `bridge` — connect an image classifier to the feature-loss simulator.
 *
 *   bridge extract --model DIR --layer NAME --images DIR --out DIR
 *   bridge score   --model DIR --layer NAME --tensors DIR --manifest CSV --out CSV
 *   bridge demo-model --out DIR [--classes N] [--size N] [--seed N]
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { buildDemoModel } from "../demo.js";
import { BridgeError } from "../errors.js";
import { extractFeatures } from "../extract.js";
import { saveModel } from "../modelio.js";
import { scoreRepaired } from "../score.js";

function fail(err: unknown): never {
  if (err instanceof BridgeError) {
    console.error(`error: ${err.message}`);
    process.exit(1);
  }
  throw err;
}

await yargs(hideBin(process.argv))
  .scriptName("bridge")
  .command(
    "extract",
    "Run the model front-end over images and export feature tensors + manifest",
    (y) =>
      y.options({
        model: { type: "string", demandOption: true, describe: "layers-model directory" },
        layer: { type: "string", demandOption: true, describe: "split layer name" },
        images: {
          type: "string",
          demandOption: true,
          describe: "directory with images.csv and NPY images",
        },
        out: { type: "string", demandOption: true, describe: "tensor output directory" },
      }),
    async (argv) => {
      try {
        const result = await extractFeatures({
          modelDir: argv.model,
          layer: argv.layer,
          imagesDir: argv.images,
          outDir: argv.out,
        });
        console.log(
          `extracted ${result.tensorFiles.length} tensors -> ${argv.out} (${result.manifestPath})`,
        );
      } catch (err) {
        fail(err);
      }
    },
  )
  .command(
    "score",
    "Classify repaired tensors with the model back-end into an accuracy CSV",
    (y) =>
      y.options({
        model: { type: "string", demandOption: true, describe: "layers-model directory" },
        layer: { type: "string", demandOption: true, describe: "split layer name" },
        tensors: {
          type: "string",
          demandOption: true,
          describe: "simulator out_dir holding repaired_index.csv",
        },
        manifest: {
          type: "string",
          demandOption: true,
          describe: "manifest CSV with true labels (from extract)",
        },
        out: { type: "string", demandOption: true, describe: "accuracy CSV to write" },
      }),
    async (argv) => {
      try {
        const result = await scoreRepaired({
          modelDir: argv.model,
          layer: argv.layer,
          tensorsDir: argv.tensors,
          manifestPath: argv.manifest,
          outPath: argv.out,
        });
        console.log(
          `scored ${result.rows} tensors: top1=${result.top1Rate.toFixed(4)} ` +
            `top5=${result.top5Rate.toFixed(4)} -> ${argv.out}`,
        );
      } catch (err) {
        fail(err);
      }
    },
  )
  .command(
    "demo-model",
    "Write a small deterministic classifier for smoke tests",
    (y) =>
      y.options({
        out: { type: "string", demandOption: true, describe: "model directory to write" },
        classes: { type: "number", default: 10 },
        size: { type: "number", default: 16, describe: "input height/width" },
        channels: { type: "number", default: 3 },
        seed: { type: "number", default: 7 },
      }),
    async (argv) => {
      try {
        const model = buildDemoModel({
          inputSize: argv.size,
          channels: argv.channels,
          classes: argv.classes,
          seed: argv.seed,
        });
        await saveModel(model, argv.out);
        console.log(`wrote ${model.name} (split layer: features) -> ${argv.out}`);
      } catch (err) {
        fail(err);
      }
    },
  )
  .demandCommand(1, "pick a command: extract, score, or demo-model")
  .strict()
  .help()
  .parseAsync();
