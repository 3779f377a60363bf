/**
 * Strict reader/writer for the on-disk tensor format shared with the
 * simulator: NPY version 1.0 holding exactly one C-contiguous
 * little-endian float32 array of rank 3 (height, width, channels).
 * Anything else (other dtypes, other ranks, format version 2.0, Fortran
 * order, NaN/Inf payloads) is rejected instead of silently converted.
 */

import { promises as fs } from "node:fs";

import { NpyFormatError } from "./errors.js";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");
const ALIGN = 64;

export interface Tensor3 {
  data: Float32Array;
  shape: [number, number, number];
}

function buildHeader(shape: [number, number, number]): Buffer {
  const dictSrc = `{'descr': '<f4', 'fortran_order': False, 'shape': (${shape[0]}, ${shape[1]}, ${shape[2]}), }`;
  const base = MAGIC.length + 2 + 2;
  let pad = ALIGN - ((base + dictSrc.length + 1) % ALIGN);
  if (pad === ALIGN) {
    pad = 0;
  }
  const header = Buffer.from(dictSrc + " ".repeat(pad) + "\n", "latin1");
  const out = Buffer.alloc(base + header.length);
  MAGIC.copy(out, 0);
  out[6] = 1; // format version 1.0
  out[7] = 0;
  out.writeUInt16LE(header.length, 8);
  header.copy(out, 10);
  return out;
}

export function writeTensorBytes(tensor: Tensor3): Buffer {
  const [h, w, c] = tensor.shape;
  if (!(h > 0 && w > 0 && c > 0) || tensor.data.length !== h * w * c) {
    throw new NpyFormatError(
      `shape (${tensor.shape}) does not match ${tensor.data.length} elements`,
    );
  }
  for (const v of tensor.data) {
    if (!Number.isFinite(v)) {
      throw new NpyFormatError("tensor contains NaN or Inf");
    }
  }
  const payload = Buffer.alloc(tensor.data.length * 4);
  for (let i = 0; i < tensor.data.length; i++) {
    payload.writeFloatLE(tensor.data[i], i * 4);
  }
  return Buffer.concat([buildHeader(tensor.shape), payload]);
}

const HEADER_RE =
  /^\{\s*'descr':\s*'([^']+)'\s*,\s*'fortran_order':\s*(True|False)\s*,\s*'shape':\s*\(([0-9,\s]*)\)\s*,?\s*\}$/;

function parseHeader(buf: Buffer): { shape: [number, number, number]; offset: number } {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new NpyFormatError("bad magic, not an NPY file");
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new NpyFormatError(
      `unsupported NPY version ${buf[6]}.${buf[7]}, only 1.0 is accepted`,
    );
  }
  const hlen = buf.readUInt16LE(8);
  if (buf.length < 10 + hlen) {
    throw new NpyFormatError("truncated header");
  }
  const raw = buf.subarray(10, 10 + hlen).toString("latin1").trim();
  const match = HEADER_RE.exec(raw);
  if (!match) {
    throw new NpyFormatError(`unparseable header: ${raw}`);
  }
  const [, descr, fortran, shapeSrc] = match;
  if (descr !== "<f4") {
    throw new NpyFormatError(`dtype '${descr}' not supported, tensors are '<f4'`);
  }
  if (fortran !== "False") {
    throw new NpyFormatError("Fortran-ordered tensors are not supported");
  }
  const dims = shapeSrc
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number.parseInt(s, 10));
  if (dims.length !== 3 || dims.some((d) => !Number.isInteger(d) || d <= 0)) {
    throw new NpyFormatError(`tensor must be 3-D (h, w, c), file holds (${shapeSrc})`);
  }
  return { shape: [dims[0], dims[1], dims[2]], offset: 10 + hlen };
}

export function readTensorBytes(buf: Buffer): Tensor3 {
  const { shape, offset } = parseHeader(buf);
  const count = shape[0] * shape[1] * shape[2];
  if (buf.length - offset !== count * 4) {
    throw new NpyFormatError(
      `payload holds ${buf.length - offset} bytes, shape (${shape}) needs ${count * 4}`,
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(offset + i * 4);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) {
      throw new NpyFormatError("tensor contains NaN or Inf");
    }
  }
  return { data, shape };
}

export async function saveTensor(path: string, tensor: Tensor3): Promise<void> {
  await fs.writeFile(path, writeTensorBytes(tensor));
}

export async function loadTensor(path: string): Promise<Tensor3> {
  return readTensorBytes(await fs.readFile(path));
}
