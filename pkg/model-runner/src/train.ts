/**
 * Training loop: Adam on softmax cross-entropy over (image, mask) pairs
 * read from a dataset directory in the toolkit's exchange formats
 * (img_*.pgm + gt_*.png). Deterministic given NetSpec.seed as far as the
 * framework permits: seeded weight init, seeded dropout masks keyed by
 * the step counter, fixed sample order.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";

import { GrayImage, Mask, readMaskPng, readPgm } from "./raster";
import { buildModel, Checkpoint, NetSpec, saveCheckpoint, setDropoutNonce } from "./unet";

export interface Sample {
  id: string;
  image: GrayImage;
  mask: Mask;
}

export function loadDataset(dir: string): Sample[] {
  const samples: Sample[] = [];
  const names = fs
    .readdirSync(dir)
    .filter((n) => n.startsWith("img_") && n.endsWith(".pgm"))
    .sort();
  if (names.length === 0) {
    throw new Error(`no img_*.pgm files under ${dir}`);
  }
  for (const name of names) {
    const id = name.slice("img_".length, -".pgm".length);
    const image = readPgm(path.join(dir, name));
    const mask = readMaskPng(path.join(dir, `gt_${id}.png`));
    if (mask.height !== image.height || mask.width !== image.width) {
      throw new Error(`${id}: mask ${mask.height}x${mask.width} != image ${image.height}x${image.width}`);
    }
    samples.push({ id, image, mask });
  }
  return samples;
}

function sampleTensors(
  sample: Sample,
  classCount: number
): { x: tf.Tensor4D; y: tf.Tensor4D } {
  const { height, width } = sample.image;
  const x = new Float32Array(height * width);
  const y = new Float32Array(height * width * classCount);
  for (let p = 0; p < height * width; p++) {
    x[p] = sample.image.data[p];
    y[p * classCount + sample.mask.data[p]] = 1;
  }
  return {
    x: tf.tensor4d(x, [1, height, width, 1]),
    y: tf.tensor4d(y, [1, height, width, classCount]),
  };
}

export interface TrainResult {
  lossLog: number[];
}

export function train(
  datasetDir: string,
  outDir: string,
  spec: NetSpec,
  epochs: number,
  learningRate = 3e-3
): TrainResult {
  const samples = loadDataset(datasetDir);
  const { height, width } = samples[0].image;
  const model = buildModel(spec, height, width);
  const tensors = samples.map((s) => sampleTensors(s, spec.classCount));
  const optimizer = tf.train.adam(learningRate);

  const lossLog: number[] = [];
  let step = 0;
  for (let epoch = 0; epoch < epochs; epoch++) {
    let epochLoss = 0;
    for (const { x, y } of tensors) {
      step += 1;
      setDropoutNonce(step);
      const loss = optimizer.minimize(
        () => {
          const probs = model.apply(x, { training: true }) as tf.Tensor4D;
          return tf.tidy(() =>
            tf.neg(tf.mean(tf.sum(y.mul(tf.log(probs.add(1e-7))), -1)))
          ) as tf.Scalar;
        },
        true
      ) as tf.Scalar;
      epochLoss += loss.dataSync()[0];
      loss.dispose();
    }
    lossLog.push(epochLoss / tensors.length);
    console.error(`epoch ${epoch + 1}/${epochs}: loss ${lossLog[epoch].toFixed(5)}`);
  }
  tensors.forEach(({ x, y }) => {
    x.dispose();
    y.dispose();
  });
  optimizer.dispose();

  const meta: Checkpoint = { spec, height, width, lossLog };
  saveCheckpoint(outDir, model, meta);
  return { lossLog };
}
