/**
 * Test-time augmentation transforms, wire-compatible with the evaluation
 * toolkit's manifest schema: five kinds sampled uniformly, photometric
 * parameters uniform over the published ranges, geometric transforms
 * carrying an exact inverse that is applied to prediction maps before
 * they are stacked into a volume.
 */

import { GrayImage } from "./raster";

export type TransformKind =
  | "rotate90"
  | "horizontal-flip"
  | "brightness"
  | "contrast"
  | "gaussian-blur";

export interface TransformRecord {
  kind: TransformKind;
  seed: number | number[];
  k?: number;
  delta?: number;
  factor?: number;
  sigma?: number;
}

export const RANGES = {
  delta: [-0.2, 0.2] as const,
  factor: [0.7, 1.3] as const,
  sigma: [0.5, 2.0] as const,
};

const KINDS: TransformKind[] = [
  "rotate90",
  "horizontal-flip",
  "brightness",
  "contrast",
  "gaussian-blur",
];

export function isGeometric(record: TransformRecord): boolean {
  return record.kind === "rotate90" || record.kind === "horizontal-flip";
}

/** splitmix32-style PRNG; deterministic stream per seed */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function sampleTransform(seed: number): TransformRecord {
  const rng = mulberry32(seed);
  const kind = KINDS[Math.floor(rng() * KINDS.length)];
  switch (kind) {
    case "rotate90":
      return { kind, seed, k: Math.floor(rng() * 4) };
    case "horizontal-flip":
      return { kind, seed };
    case "brightness":
      return { kind, seed, delta: RANGES.delta[0] + rng() * (RANGES.delta[1] - RANGES.delta[0]) };
    case "contrast":
      return { kind, seed, factor: RANGES.factor[0] + rng() * (RANGES.factor[1] - RANGES.factor[0]) };
    case "gaussian-blur":
      return { kind, seed, sigma: RANGES.sigma[0] + rng() * (RANGES.sigma[1] - RANGES.sigma[0]) };
  }
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/** counterclockwise quarter turn: dst[i][j] = src[j][w-1-i] */
function rot90ccw(data: Float64Array, h: number, w: number): { data: Float64Array; h: number; w: number } {
  const out = new Float64Array(h * w);
  for (let i = 0; i < w; i++) {
    for (let j = 0; j < h; j++) {
      out[i * h + j] = data[j * w + (w - 1 - i)];
    }
  }
  return { data: out, h: w, w: h };
}

function hflip(data: Float64Array, h: number, w: number): Float64Array {
  const out = new Float64Array(h * w);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      out[i * w + j] = data[i * w + (w - 1 - j)];
    }
  }
  return out;
}

function reflectIndex(i: number, n: number): number {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

function gaussianKernel(sigma: number): Float64Array {
  const radius = Math.max(1, Math.ceil(3 * sigma));
  const kernel = new Float64Array(2 * radius + 1);
  let total = 0;
  for (let x = -radius; x <= radius; x++) {
    const v = Math.exp(-0.5 * (x / sigma) ** 2);
    kernel[x + radius] = v;
    total += v;
  }
  for (let i = 0; i < kernel.length; i++) kernel[i] /= total;
  return kernel;
}

function blur(data: Float64Array, h: number, w: number, sigma: number): Float64Array {
  const kernel = gaussianKernel(sigma);
  const radius = (kernel.length - 1) / 2;
  const tmp = new Float64Array(h * w);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      let acc = 0;
      for (let t = -radius; t <= radius; t++) {
        acc += kernel[t + radius] * data[reflectIndex(i + t, h) * w + j];
      }
      tmp[i * w + j] = acc;
    }
  }
  const out = new Float64Array(h * w);
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      let acc = 0;
      for (let t = -radius; t <= radius; t++) {
        acc += kernel[t + radius] * tmp[i * w + reflectIndex(j + t, w)];
      }
      out[i * w + j] = clamp01(acc);
    }
  }
  return out;
}

export function applyToImage(record: TransformRecord, img: GrayImage): GrayImage {
  switch (record.kind) {
    case "rotate90": {
      let cur = { data: img.data, h: img.height, w: img.width };
      for (let n = 0; n < (record.k ?? 0); n++) cur = rot90ccw(cur.data, cur.h, cur.w);
      return { height: cur.h, width: cur.w, data: cur.data };
    }
    case "horizontal-flip":
      return { height: img.height, width: img.width, data: hflip(img.data, img.height, img.width) };
    case "brightness": {
      const out = new Float64Array(img.data.length);
      for (let p = 0; p < out.length; p++) out[p] = clamp01(img.data[p] + (record.delta ?? 0));
      return { height: img.height, width: img.width, data: out };
    }
    case "contrast": {
      let mean = 0;
      for (let p = 0; p < img.data.length; p++) mean += img.data[p];
      mean /= img.data.length;
      const out = new Float64Array(img.data.length);
      for (let p = 0; p < out.length; p++) {
        out[p] = clamp01(mean + (record.factor ?? 1) * (img.data[p] - mean));
      }
      return { height: img.height, width: img.width, data: out };
    }
    case "gaussian-blur":
      return {
        height: img.height,
        width: img.width,
        data: blur(img.data, img.height, img.width, record.sigma ?? 1),
      };
  }
}

/** per-pixel class probabilities in row-major (H, W, C) order */
export interface ProbMap {
  height: number;
  width: number;
  classes: number;
  data: Float32Array;
}

/**
 * Map a prediction on the transformed input back to input geometry.
 * Photometric records are the identity; geometric records apply the exact
 * inverse pixel permutation to every class channel.
 */
export function invertOnMap(record: TransformRecord, map: ProbMap): ProbMap {
  if (!isGeometric(record)) {
    return map;
  }
  const { height: h, width: w, classes: c } = map;
  if (record.kind === "horizontal-flip") {
    const out = new Float32Array(map.data.length);
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        for (let ch = 0; ch < c; ch++) {
          out[(i * w + j) * c + ch] = map.data[(i * w + (w - 1 - j)) * c + ch];
        }
      }
    }
    return { height: h, width: w, classes: c, data: out };
  }
  // inverse of k ccw turns = (4 - k) % 4 ccw turns
  let cur = map;
  const turns = (4 - ((record.k ?? 0) % 4)) % 4;
  for (let n = 0; n < turns; n++) {
    const { height: ch_, width: cw, classes: cc } = cur;
    const out = new Float32Array(cur.data.length);
    for (let i = 0; i < cw; i++) {
      for (let j = 0; j < ch_; j++) {
        for (let ch = 0; ch < cc; ch++) {
          out[(i * ch_ + j) * cc + ch] = cur.data[(j * cw + (cw - 1 - i)) * cc + ch];
        }
      }
    }
    cur = { height: cw, width: ch_, classes: cc, data: out };
  }
  return cur;
}

export function recordToManifestEntry(record: TransformRecord): Record<string, unknown> {
  const entry: Record<string, unknown> = {
    kind: record.kind,
    invertibility: isGeometric(record) ? "geometric" : "photometric",
    seed: record.seed,
  };
  if (record.kind === "rotate90") entry.k = record.k;
  if (record.kind === "brightness") entry.delta = record.delta;
  if (record.kind === "contrast") entry.factor = record.factor;
  if (record.kind === "gaussian-blur") entry.sigma = record.sigma;
  return entry;
}

export function writeManifestDoc(records: TransformRecord[], imageId: string): string {
  const doc = {
    schema_version: 1,
    image_id: imageId,
    passes: records.length,
    transforms: records.map(recordToManifestEntry),
  };
  return JSON.stringify(doc, null, 2) + "\n";
}
