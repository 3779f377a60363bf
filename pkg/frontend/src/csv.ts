/**
 * The three CSV contracts the bridge exchanges with the simulator:
 *
 * - images CSV (bridge input):    image_id,image_file,label
 * - manifest CSV (bridge output): image_id,tensor_file,label
 * - repaired index (sim output):  tensor_id,method,pb,lb,realization,path
 * - accuracy CSV (bridge output): tensor_id,method,pb,lb,realization,top1,top5
 *
 * pb/lb values are carried through verbatim as strings so the accuracy
 * rows parse to exactly the same floats as the simulator's records.
 */

import { promises as fs } from "node:fs";

import Papa from "papaparse";

import { CsvFormatError } from "./errors.js";

export interface ImageRow {
  imageId: string;
  imageFile: string;
  label: number;
}

export interface ManifestRow {
  imageId: string;
  tensorFile: string;
  label: number;
}

export interface RepairedRow {
  tensorId: string;
  method: string;
  pb: string;
  lb: string;
  realization: string;
  path: string;
}

export interface AccuracyRow {
  tensorId: string;
  method: string;
  pb: string;
  lb: string;
  realization: string;
  top1: 0 | 1;
  top5: 0 | 1;
}

async function parseRows(path: string, expectedHeader: string[]): Promise<Record<string, string>[]> {
  const text = await fs.readFile(path, "utf8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new CsvFormatError(`${path}: ${first.message} (row ${first.row})`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = expectedHeader.filter((f) => !fields.includes(f));
  if (missing.length > 0) {
    throw new CsvFormatError(
      `${path}: header [${fields}] is missing columns [${missing}]`,
    );
  }
  return parsed.data;
}

function parseLabel(raw: string, path: string): number {
  const label = Number.parseInt(raw, 10);
  if (!Number.isInteger(label) || label < 0 || String(label) !== raw.trim()) {
    throw new CsvFormatError(`${path}: label '${raw}' is not a class index`);
  }
  return label;
}

export async function readImagesCsv(path: string): Promise<ImageRow[]> {
  const rows = await parseRows(path, ["image_id", "image_file", "label"]);
  return rows.map((r) => ({
    imageId: r.image_id,
    imageFile: r.image_file,
    label: parseLabel(r.label, path),
  }));
}

export async function readManifestCsv(path: string): Promise<ManifestRow[]> {
  const rows = await parseRows(path, ["image_id", "tensor_file", "label"]);
  return rows.map((r) => ({
    imageId: r.image_id,
    tensorFile: r.tensor_file,
    label: parseLabel(r.label, path),
  }));
}

export async function writeManifestCsv(path: string, rows: ManifestRow[]): Promise<void> {
  const lines = ["image_id,tensor_file,label"];
  for (const r of rows) {
    lines.push(`${r.imageId},${r.tensorFile},${r.label}`);
  }
  await fs.writeFile(path, lines.join("\n") + "\n");
}

export async function readRepairedIndex(path: string): Promise<RepairedRow[]> {
  const rows = await parseRows(path, [
    "tensor_id",
    "method",
    "pb",
    "lb",
    "realization",
    "path",
  ]);
  return rows.map((r) => ({
    tensorId: r.tensor_id,
    method: r.method,
    pb: r.pb,
    lb: r.lb,
    realization: r.realization,
    path: r.path,
  }));
}

export async function writeAccuracyCsv(path: string, rows: AccuracyRow[]): Promise<void> {
  const lines = ["tensor_id,method,pb,lb,realization,top1,top5"];
  for (const r of rows) {
    lines.push(
      `${r.tensorId},${r.method},${r.pb},${r.lb},${r.realization},${r.top1},${r.top5}`,
    );
  }
  await fs.writeFile(path, lines.join("\n") + "\n");
}
