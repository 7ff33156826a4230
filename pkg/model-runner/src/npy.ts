/**
 * Minimal NPY v1.0 reader/writer for little-endian float32 tensors.
 *
 * The on-disk layout matches what the evaluation toolkit consumes:
 * magic, version (1, 0), uint16 header length, a Python dict literal
 * padded with spaces to 64-byte alignment and terminated by a newline,
 * then the raw C-order payload.
 */

import * as fs from "fs";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");

export function writeNpy(path: string, data: Float32Array, shape: number[]): void {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] does not match ${data.length} elements`);
  }
  const shapeLiteral = shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(", ")})`;
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeLiteral}, }`;
  const unpadded = MAGIC.length + 2 + 2 + header.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  header = header + " ".repeat(pad) + "\n";

  const head = Buffer.alloc(MAGIC.length + 4 + header.length);
  MAGIC.copy(head, 0);
  head.writeUInt8(1, 6);
  head.writeUInt8(0, 7);
  head.writeUInt16LE(header.length, 8);
  head.write(header, 10, "latin1");

  const payload = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) {
    payload.writeFloatLE(data[i], i * 4);
  }
  fs.writeFileSync(path, Buffer.concat([head, payload]));
}

export interface NpyTensor {
  shape: number[];
  data: Float32Array;
}

export function readNpy(path: string): NpyTensor {
  const blob = fs.readFileSync(path);
  if (!blob.subarray(0, 6).equals(MAGIC)) {
    throw new Error(`${path}: not an NPY file`);
  }
  const major = blob.readUInt8(6);
  if (major !== 1) {
    throw new Error(`${path}: unsupported NPY version ${major}`);
  }
  const headerLen = blob.readUInt16LE(8);
  const header = blob.subarray(10, 10 + headerLen).toString("latin1");
  if (!header.includes("'descr': '<f4'")) {
    throw new Error(`${path}: only little-endian float32 is supported`);
  }
  if (!header.includes("'fortran_order': False")) {
    throw new Error(`${path}: fortran-order payloads are not supported`);
  }
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!shapeMatch) {
    throw new Error(`${path}: malformed NPY header`);
  }
  const shape = shapeMatch[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const start = 10 + headerLen;
  if (blob.length - start < count * 4) {
    throw new Error(`${path}: truncated payload`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = blob.readFloatLE(start + i * 4);
  }
  return { shape, data };
}
