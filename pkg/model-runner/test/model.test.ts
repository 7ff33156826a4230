import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { readNpy } from "../src/npy";
import { inferMc } from "../src/infer";
import { GrayImage } from "../src/raster";
import { DEFAULT_SPEC, buildModel, loadCheckpoint, saveCheckpoint } from "../src/unet";

const SIZE = 16;

function testImage(): GrayImage {
  const data = new Float64Array(SIZE * SIZE);
  for (let i = 0; i < data.length; i++) data[i] = ((i * 13) % 64) / 64;
  return { height: SIZE, width: SIZE, data };
}

function freshCheckpoint(dropoutRate: number, seed = 3): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ckpt-"));
  const spec = { ...DEFAULT_SPEC, dropoutRate, seed, baseFilters: 2, convUnitsPerBlock: 2 };
  const model = buildModel(spec, SIZE, SIZE);
  saveCheckpoint(dir, model, { spec, height: SIZE, width: SIZE, lossLog: [] });
  return dir;
}

function passSlices(volPath: string): { passes: number; slices: Float32Array[] } {
  const vol = readNpy(volPath);
  const [t, c, h, w] = vol.shape;
  const per = c * h * w;
  const slices: Float32Array[] = [];
  for (let ti = 0; ti < t; ti++) slices.push(vol.data.subarray(ti * per, (ti + 1) * per));
  return { passes: t, slices };
}

describe("stochastic passes", () => {
  it("dropout rate 0 makes every pass identical", () => {
    const ckpt = freshCheckpoint(0);
    const out = path.join(fs.mkdtempSync(path.join(os.tmpdir(), "vol-")), "mc.npy");
    inferMc(ckpt, testImage(), 5, out);
    const { slices } = passSlices(out);
    for (const s of slices.slice(1)) {
      expect(Array.from(s)).toEqual(Array.from(slices[0]));
    }
  });

  it("dropout rate 0.3 varies at least one pixel across passes", () => {
    const ckpt = freshCheckpoint(0.3);
    const out = path.join(fs.mkdtempSync(path.join(os.tmpdir(), "vol-")), "mc.npy");
    inferMc(ckpt, testImage(), 5, out);
    const { slices } = passSlices(out);
    let varies = false;
    for (const s of slices.slice(1)) {
      for (let i = 0; i < s.length; i++) {
        if (s[i] !== slices[0][i]) {
          varies = true;
          break;
        }
      }
    }
    expect(varies).toBe(true);
  });

  it("repeated runs are bit-identical (counter-seeded masks)", () => {
    const ckpt = freshCheckpoint(0.3);
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "vol-"));
    inferMc(ckpt, testImage(), 4, path.join(dir, "a.npy"));
    inferMc(ckpt, testImage(), 4, path.join(dir, "b.npy"));
    expect(fs.readFileSync(path.join(dir, "a.npy"))).toEqual(
      fs.readFileSync(path.join(dir, "b.npy"))
    );
  });

  it("exports volumes whose class vectors sum to one", () => {
    const ckpt = freshCheckpoint(0.3);
    const out = path.join(fs.mkdtempSync(path.join(os.tmpdir(), "vol-")), "mc.npy");
    inferMc(ckpt, testImage(), 3, out);
    const vol = readNpy(out);
    const [t, c, h, w] = vol.shape;
    expect(c).toBe(2);
    for (let ti = 0; ti < t; ti++) {
      for (let p = 0; p < h * w; p++) {
        let total = 0;
        for (let ch = 0; ch < c; ch++) total += vol.data[(ti * c + ch) * h * w + p];
        expect(Math.abs(total - 1)).toBeLessThan(1e-5);
      }
    }
  });
});

describe("checkpointing", () => {
  it("weights survive a save/load round trip", () => {
    const ckpt = freshCheckpoint(0);
    const img = testImage();
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "vol-"));
    inferMc(ckpt, img, 1, path.join(dir, "first.npy"));
    const { model, meta } = loadCheckpoint(ckpt);
    saveCheckpoint(path.join(dir, "resaved"), model, meta);
    inferMc(path.join(dir, "resaved"), img, 1, path.join(dir, "second.npy"));
    expect(fs.readFileSync(path.join(dir, "first.npy"))).toEqual(
      fs.readFileSync(path.join(dir, "second.npy"))
    );
  });
});
