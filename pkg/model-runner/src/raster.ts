/**
 * Raster input formats of the evaluation toolkit: binary PGM (P5)
 * grayscale images at 8 or 16 bits, and 8-bit grayscale PNG masks whose
 * only legal sample values are 0 and 255.
 */

import * as fs from "fs";
import { PNG } from "pngjs";

export interface GrayImage {
  height: number;
  width: number;
  /** row-major intensities in [0, 1] */
  data: Float64Array;
}

export interface Mask {
  height: number;
  width: number;
  /** row-major {0, 1} labels */
  data: Uint8Array;
}

export function readPgm(path: string): GrayImage {
  const blob = fs.readFileSync(path);
  const tokens: string[] = [];
  let i = 0;
  while (tokens.length < 4 && i < blob.length) {
    const ch = String.fromCharCode(blob[i]);
    if (/\s/.test(ch)) {
      i += 1;
      continue;
    }
    if (ch === "#") {
      while (i < blob.length && blob[i] !== 0x0a) i += 1;
      continue;
    }
    let start = i;
    while (i < blob.length && !/\s/.test(String.fromCharCode(blob[i]))) i += 1;
    tokens.push(blob.subarray(start, i).toString("latin1"));
  }
  if (tokens.length < 4 || tokens[0] !== "P5") {
    throw new Error(`${path}: not a binary PGM`);
  }
  const [width, height, maxval] = tokens.slice(1).map((t) => parseInt(t, 10));
  if (!(width > 0 && height > 0 && maxval > 0 && maxval <= 65535)) {
    throw new Error(`${path}: bad PGM header`);
  }
  const offset = i + 1; // single whitespace byte after maxval
  const wide = maxval > 255;
  const expected = width * height * (wide ? 2 : 1);
  if (blob.length - offset < expected) {
    throw new Error(`${path}: truncated PGM payload`);
  }
  const data = new Float64Array(width * height);
  for (let p = 0; p < width * height; p++) {
    const raw = wide ? blob.readUInt16BE(offset + 2 * p) : blob[offset + p];
    data[p] = raw / maxval;
  }
  return { height, width, data };
}

export function readMaskPng(path: string): Mask {
  const png = PNG.sync.read(fs.readFileSync(path));
  const data = new Uint8Array(png.width * png.height);
  for (let p = 0; p < png.width * png.height; p++) {
    const value = png.data[4 * p]; // pngjs expands grayscale to RGBA
    if (value !== 0 && value !== 255) {
      throw new Error(`${path}: mask sample ${value} is not 0/255`);
    }
    data[p] = value === 255 ? 1 : 0;
  }
  return { height: png.height, width: png.width, data };
}
