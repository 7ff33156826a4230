/**
 * Volume export: repeated stochastic passes (dropout active, pass index
 * seeds the masks) or test-time augmentation (dropout off, each pass a
 * transformed input whose prediction is back-transformed before
 * stacking). Both write [T, C, H, W] float32 NPY volumes the evaluation
 * toolkit validates and consumes; TTA additionally writes its manifest.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";

import { writeNpy } from "./npy";
import { GrayImage } from "./raster";
import {
  ProbMap,
  TransformRecord,
  applyToImage,
  invertOnMap,
  sampleTransform,
  writeManifestDoc,
} from "./transforms";
import { loadCheckpoint, setDropoutNonce } from "./unet";

function predict(model: tf.LayersModel, img: GrayImage, classCount: number): ProbMap {
  const x = tf.tensor4d(Float32Array.from(img.data), [1, img.height, img.width, 1]);
  const out = tf.tidy(() => model.apply(x, { training: true }) as tf.Tensor4D);
  const data = out.dataSync() as Float32Array; // (H, W, C) row-major
  x.dispose();
  out.dispose();
  return { height: img.height, width: img.width, classes: classCount, data: new Float32Array(data) };
}

function volumeFromMaps(maps: ProbMap[]): { data: Float32Array; shape: number[] } {
  const { height: h, width: w, classes: c } = maps[0];
  for (const m of maps) {
    if (m.height !== h || m.width !== w || m.classes !== c) {
      throw new Error("pass maps disagree in shape");
    }
  }
  const t = maps.length;
  const out = new Float32Array(t * c * h * w);
  maps.forEach((m, ti) => {
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        for (let ch = 0; ch < c; ch++) {
          out[((ti * c + ch) * h + i) * w + j] = m.data[(i * w + j) * c + ch];
        }
      }
    }
  });
  return { data: out, shape: [t, c, h, w] };
}

export function inferMc(
  checkpointDir: string,
  img: GrayImage,
  passes: number,
  outPath: string
): void {
  const { model, meta } = loadCheckpoint(checkpointDir);
  const maps: ProbMap[] = [];
  for (let t = 0; t < passes; t++) {
    setDropoutNonce(1_000_000 + t);
    maps.push(predict(model, img, meta.spec.classCount));
  }
  const { data, shape } = volumeFromMaps(maps);
  writeNpy(outPath, data, shape);
}

export function inferTta(
  checkpointDir: string,
  img: GrayImage,
  passes: number,
  seed: number,
  outPath: string,
  manifestPath: string,
  imageId: string
): TransformRecord[] {
  // fixed weights: dropout disabled for every augmented pass
  const { model, meta } = loadCheckpoint(checkpointDir, 0);
  setDropoutNonce(0);
  const records: TransformRecord[] = [];
  const maps: ProbMap[] = [];
  for (let t = 0; t < passes; t++) {
    const record = sampleTransform((seed * 1_000_003 + t) >>> 0);
    records.push(record);
    const transformed = applyToImage(record, img);
    const map = predict(model, transformed, meta.spec.classCount);
    maps.push(invertOnMap(record, map));
  }
  const { data, shape } = volumeFromMaps(maps);
  writeNpy(outPath, data, shape);
  fs.writeFileSync(manifestPath, writeManifestDoc(records, imageId));
  return records;
}
