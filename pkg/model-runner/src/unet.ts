/**
 * Toy U-Net: four encoder and four decoder blocks, each block a stack of
 * convolutional units (conv -> batch norm -> leaky ReLU) with spatial
 * dropout placed before every convolution; 2x max-pooling between encoder
 * blocks, mirrored upsampling in the decoder, skip connections from each
 * encoder block to the same-resolution decoder block, and a final
 * class-count convolution with softmax.
 *
 * All inference runs with training=true so spatial dropout can stay
 * active for stochastic passes (rate 0 makes the network a deterministic
 * function of its input); batch statistics are used for normalization,
 * which keeps every pass a pure function of (weights, input, pass seed).
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";

export interface NetSpec {
  classCount: number;
  /** encoder/decoder block count; the architecture is described with 4 */
  blockCount: number;
  /** convolutional units per block; the architecture is described with 4 */
  convUnitsPerBlock: number;
  /** filters in the first encoder block; doubles per level */
  baseFilters: number;
  /** spatial dropout rate applied before every conv layer */
  dropoutRate: number;
  leakyAlpha: number;
  seed: number;
}

export const DEFAULT_SPEC: NetSpec = {
  classCount: 2,
  blockCount: 4,
  convUnitsPerBlock: 4,
  baseFilters: 4,
  dropoutRate: 0.2,
  leakyAlpha: 0.2,
  seed: 0,
};

/** nonce mixed into every dropout mask; bump per pass / per step */
let dropoutNonce = 0;

export function setDropoutNonce(nonce: number): void {
  dropoutNonce = nonce;
}

class SpatialDropout extends tf.layers.Layer {
  static nextId = 0;
  private readonly rate: number;
  private readonly layerId: number;

  constructor(rate: number) {
    super({ name: `spatial_dropout_${SpatialDropout.nextId}` });
    this.rate = rate;
    this.layerId = SpatialDropout.nextId++;
  }

  computeOutputShape(inputShape: tf.Shape | tf.Shape[]): tf.Shape | tf.Shape[] {
    return inputShape;
  }

  call(inputs: tf.Tensor | tf.Tensor[], kwargs: { [key: string]: unknown }): tf.Tensor {
    const x = (Array.isArray(inputs) ? inputs[0] : inputs) as tf.Tensor4D;
    if (!kwargs["training"] || this.rate <= 0) {
      return x;
    }
    const [b, , , c] = x.shape;
    const seed = ((this.layerId + 1) * 2654435761 + dropoutNonce * 40503) >>> 0;
    return tf.tidy(() => {
      // channel-wise mask: zero whole feature maps, rescale the rest
      const mask = tf
        .randomUniform([b, 1, 1, c], 0, 1, "float32", seed)
        .greaterEqual(this.rate)
        .toFloat();
      return x.mul(mask).div(1 - this.rate);
    });
  }

  getClassName(): string {
    return "SpatialDropout";
  }
}

function convUnit(
  x: tf.SymbolicTensor,
  filters: number,
  spec: NetSpec,
  seedOffset: number
): tf.SymbolicTensor {
  let y = new SpatialDropout(spec.dropoutRate).apply(x) as tf.SymbolicTensor;
  y = tf.layers
    .conv2d({
      filters,
      kernelSize: 3,
      padding: "same",
      kernelInitializer: tf.initializers.glorotUniform({ seed: spec.seed + seedOffset }),
    })
    .apply(y) as tf.SymbolicTensor;
  y = tf.layers.batchNormalization({}).apply(y) as tf.SymbolicTensor;
  return tf.layers.leakyReLU({ alpha: spec.leakyAlpha }).apply(y) as tf.SymbolicTensor;
}

function block(
  x: tf.SymbolicTensor,
  filters: number,
  spec: NetSpec,
  seedBase: number
): tf.SymbolicTensor {
  let y = x;
  for (let u = 0; u < spec.convUnitsPerBlock; u++) {
    y = convUnit(y, filters, spec, seedBase + u);
  }
  return y;
}

export function buildModel(spec: NetSpec, height: number, width: number): tf.LayersModel {
  SpatialDropout.nextId = 0;
  const levels = spec.blockCount;
  const input = tf.input({ shape: [height, width, 1] });

  const skips: tf.SymbolicTensor[] = [];
  let x = input;
  for (let level = 0; level < levels; level++) {
    x = block(x, spec.baseFilters << level, spec, 100 * level);
    if (level < levels - 1) {
      skips.push(x);
      x = tf.layers.maxPooling2d({ poolSize: 2 }).apply(x) as tf.SymbolicTensor;
    }
  }
  for (let level = levels - 2; level >= 0; level--) {
    x = tf.layers.upSampling2d({ size: [2, 2] }).apply(x) as tf.SymbolicTensor;
    x = tf.layers.concatenate().apply([x, skips[level]]) as tf.SymbolicTensor;
    x = block(x, spec.baseFilters << level, spec, 1000 + 100 * level);
  }
  const logits = tf.layers
    .conv2d({
      filters: spec.classCount,
      kernelSize: 1,
      padding: "same",
      kernelInitializer: tf.initializers.glorotUniform({ seed: spec.seed + 9999 }),
    })
    .apply(x) as tf.SymbolicTensor;
  const probs = tf.layers.softmax({ axis: -1 }).apply(logits) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: probs });
}

export interface Checkpoint {
  spec: NetSpec;
  height: number;
  width: number;
  lossLog: number[];
}

export function saveCheckpoint(
  dir: string,
  model: tf.LayersModel,
  meta: Checkpoint
): void {
  fs.mkdirSync(dir, { recursive: true });
  const weights = model.getWeights();
  const shapes = weights.map((w) => w.shape);
  const chunks: Buffer[] = [];
  for (const w of weights) {
    const values = w.dataSync() as Float32Array;
    const buf = Buffer.alloc(values.length * 4);
    for (let i = 0; i < values.length; i++) buf.writeFloatLE(values[i], i * 4);
    chunks.push(buf);
  }
  fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.concat(chunks));
  fs.writeFileSync(
    path.join(dir, "checkpoint.json"),
    JSON.stringify({ ...meta, weightShapes: shapes }, null, 2) + "\n"
  );
}

export function loadCheckpoint(
  dir: string,
  dropoutRateOverride?: number
): { model: tf.LayersModel; meta: Checkpoint } {
  const metaRaw = JSON.parse(fs.readFileSync(path.join(dir, "checkpoint.json"), "utf8"));
  const meta: Checkpoint = {
    spec: metaRaw.spec,
    height: metaRaw.height,
    width: metaRaw.width,
    lossLog: metaRaw.lossLog,
  };
  const spec =
    dropoutRateOverride === undefined
      ? meta.spec
      : { ...meta.spec, dropoutRate: dropoutRateOverride };
  const model = buildModel(spec, meta.height, meta.width);
  const blob = fs.readFileSync(path.join(dir, "weights.bin"));
  const weights: tf.Tensor[] = [];
  let offset = 0;
  for (const shape of metaRaw.weightShapes as number[][]) {
    const count = shape.reduce((a: number, b: number) => a * b, 1);
    const values = new Float32Array(count);
    for (let i = 0; i < count; i++) values[i] = blob.readFloatLE(offset + i * 4);
    offset += count * 4;
    weights.push(tf.tensor(values, shape));
  }
  model.setWeights(weights);
  weights.forEach((w) => w.dispose());
  return { model, meta };
}
