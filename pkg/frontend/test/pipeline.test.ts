import { execFileSync, spawnSync } from "node:child_process";
import { existsSync, promises as fs, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { readImagesCsv, readManifestCsv } from "../src/csv.js";
import { buildDemoModel } from "../src/demo.js";
import { extractFeatures } from "../src/extract.js";
import { saveModel } from "../src/modelio.js";
import { loadTensor, saveTensor, type Tensor3 } from "../src/npy.js";
import { scoreRepaired } from "../src/score.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const cliPath = path.join(here, "..", "dist", "cli", "bridge.js");
const scratch = mkdtempSync(path.join(tmpdir(), "bridge-pipeline-"));
const modelDir = path.join(scratch, "model");
const imagesDir = path.join(scratch, "images");
const tensorsDir = path.join(scratch, "tensors");

const simAvailable = spawnSync("sim", ["--version"]).status === 0;

function randomImage(seed: number): Tensor3 {
  const t = tf.randomUniform([16, 16, 3], -1, 1, "float32", seed);
  const data = new Float32Array(t.dataSync() as Float32Array);
  t.dispose();
  return { data, shape: [16, 16, 3] };
}

beforeAll(async () => {
  const model = buildDemoModel({ seed: 7, classes: 10 });
  await saveModel(model, modelDir);
  await fs.mkdir(imagesDir, { recursive: true });
  // labels are the model's own predictions, so an undamaged pipeline
  // must score top1 = 1 on every image
  const lines = ["image_id,image_file,label"];
  for (let i = 0; i < 6; i++) {
    const image = randomImage(100 + i);
    await saveTensor(path.join(imagesDir, `img${i}.npy`), image);
    const label = tf.tidy(() => {
      const x = tf.tensor4d(image.data, [1, 16, 16, 3]);
      return (model.predict(x) as tf.Tensor).argMax(-1).dataSync()[0];
    });
    lines.push(`img${i},img${i}.npy,${label}`);
  }
  await fs.writeFile(path.join(imagesDir, "images.csv"), lines.join("\n") + "\n");
}, 120_000);

afterAll(() => rmSync(scratch, { recursive: true, force: true }));

describe("extract -> score pipeline", () => {
  it("exports feature tensors with a manifest", async () => {
    const result = await extractFeatures({
      modelDir,
      layer: "features",
      imagesDir,
      outDir: tensorsDir,
    });
    expect(result.tensorFiles).toHaveLength(6);
    const manifest = await readManifestCsv(result.manifestPath);
    expect(manifest.map((r) => r.imageId)).toEqual([
      "img0",
      "img1",
      "img2",
      "img3",
      "img4",
      "img5",
    ]);
    const tensor = await loadTensor(path.join(tensorsDir, "img0.npy"));
    expect(tensor.shape).toEqual([16, 16, 8]);
    const images = await readImagesCsv(path.join(imagesDir, "images.csv"));
    expect(manifest.map((r) => r.label)).toEqual(images.map((r) => r.label));
  }, 60_000);

  it("scores undamaged tensors at top1 = 1", async () => {
    // fabricate a loss-free "repaired" set: the tensors exactly as extracted
    const outDir = path.join(scratch, "perfect");
    await fs.mkdir(path.join(outDir, "repaired"), { recursive: true });
    const manifest = await readManifestCsv(path.join(tensorsDir, "manifest.csv"));
    const lines = ["tensor_id,method,pb,lb,realization,path"];
    for (const row of manifest) {
      const rel = path.join("repaired", `${row.imageId}__none.npy`);
      await fs.copyFile(path.join(tensorsDir, row.tensorFile), path.join(outDir, rel));
      lines.push(`${row.imageId},none,0,0,0,${rel}`);
    }
    await fs.writeFile(path.join(outDir, "repaired_index.csv"), lines.join("\n") + "\n");

    const result = await scoreRepaired({
      modelDir,
      layer: "features",
      tensorsDir: outDir,
      manifestPath: path.join(tensorsDir, "manifest.csv"),
      outPath: path.join(outDir, "accuracy.csv"),
    });
    expect(result.rows).toBe(6);
    expect(result.top1Rate).toBe(1);
    expect(result.top5Rate).toBe(1);
    const csv = await fs.readFile(path.join(outDir, "accuracy.csv"), "utf8");
    expect(csv.split("\n")[0]).toBe("tensor_id,method,pb,lb,realization,top1,top5");
    expect(csv.trim().split("\n")).toHaveLength(7);
  }, 60_000);

  it("runs the same flow through the built CLI", () => {
    expect(existsSync(cliPath)).toBe(true);
    const cliDir = path.join(scratch, "cli");
    execFileSync("node", [
      cliPath,
      "demo-model",
      "--out",
      path.join(cliDir, "model"),
      "--seed",
      "7",
    ]);
    const out = execFileSync(
      "node",
      [
        cliPath,
        "extract",
        "--model",
        path.join(cliDir, "model"),
        "--layer",
        "features",
        "--images",
        imagesDir,
        "--out",
        path.join(cliDir, "tensors"),
      ],
      { encoding: "utf8" },
    );
    expect(out).toContain("extracted 6 tensors");
    expect(existsSync(path.join(cliDir, "tensors", "manifest.csv"))).toBe(true);
  }, 120_000);

  it("rejects tensors whose shape does not match the split", async () => {
    const outDir = path.join(scratch, "badshape");
    await fs.mkdir(outDir, { recursive: true });
    await saveTensor(path.join(outDir, "bad.npy"), {
      data: new Float32Array(4 * 4 * 2),
      shape: [4, 4, 2],
    });
    await fs.writeFile(
      path.join(outDir, "repaired_index.csv"),
      "tensor_id,method,pb,lb,realization,path\nimg0,none,0,0,0,bad.npy\n",
    );
    await expect(
      scoreRepaired({
        modelDir,
        layer: "features",
        tensorsDir: outDir,
        manifestPath: path.join(tensorsDir, "manifest.csv"),
        outPath: path.join(outDir, "accuracy.csv"),
      }),
    ).rejects.toThrow(/back-end expects/);
  }, 60_000);
});

describe.skipIf(!simAvailable)("interop with the simulator", () => {
  it("scores simulator-repaired tensors and joins them into the aggregate", async () => {
    const simDir = path.join(scratch, "sim");
    await fs.mkdir(simDir, { recursive: true });
    const config = [
      "[tensors]",
      `dir = "${tensorsDir}"`,
      "",
      "[packetization]",
      "r_p = 4",
      "",
      "[channel]",
      "model = \"ge\"",
      "points = [[0.3, 2.0]]",
      "",
      "[run]",
      'methods = ["none", "caltec"]',
      "seed = 424242",
      "realizations = 3",
      `out_dir = "${path.join(simDir, "out")}"`,
      "save_repaired = true",
      "",
    ].join("\n");
    const configPath = path.join(simDir, "exp.toml");
    await fs.writeFile(configPath, config);
    execFileSync("sim", ["mc", "--config", configPath], { encoding: "utf8" });

    const accuracyPath = path.join(simDir, "accuracy.csv");
    const result = await scoreRepaired({
      modelDir,
      layer: "features",
      tensorsDir: path.join(simDir, "out"),
      manifestPath: path.join(tensorsDir, "manifest.csv"),
      outPath: accuracyPath,
    });
    expect(result.rows).toBe(6 * 3 * 2); // tensors x realizations x methods

    const aggPath = path.join(simDir, "agg.csv");
    execFileSync(
      "sim",
      [
        "aggregate",
        "--records",
        path.join(simDir, "out", "records.csv"),
        "--out",
        aggPath,
        "--accuracy",
        accuracyPath,
      ],
      { encoding: "utf8" },
    );
    const agg = await fs.readFile(aggPath, "utf8");
    const [header, ...rows] = agg.trim().split("\n");
    expect(header.split(",")).toContain("top1_mean");
    const cells = rows.filter((r) => r.startsWith("cell,"));
    expect(cells.length).toBe(2); // one per method
    for (const row of cells) {
      const top1 = Number.parseFloat(row.split(",")[11]);
      expect(top1).toBeGreaterThanOrEqual(0);
      expect(top1).toBeLessThanOrEqual(1);
    }
  }, 300_000);
});
