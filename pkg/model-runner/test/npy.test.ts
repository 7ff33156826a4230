import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { readNpy, writeNpy } from "../src/npy";

function tmpFile(name: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "npy-"));
  return path.join(dir, name);
}

describe("npy", () => {
  it("round-trips float32 tensors bit for bit", () => {
    const data = Float32Array.from({ length: 24 }, (_, i) => Math.fround(Math.sin(i) * 0.5 + 0.5));
    const file = tmpFile("t.npy");
    writeNpy(file, data, [2, 3, 4]);
    const back = readNpy(file);
    expect(back.shape).toEqual([2, 3, 4]);
    expect(Array.from(back.data)).toEqual(Array.from(data));
  });

  it("writes a v1.0 header with the expected dict fields", () => {
    const file = tmpFile("h.npy");
    writeNpy(file, new Float32Array(8), [2, 2, 2, 1]);
    const blob = fs.readFileSync(file);
    expect(blob.subarray(0, 6).toString("latin1")).toBe("\x93NUMPY");
    expect(blob[6]).toBe(1);
    expect(blob[7]).toBe(0);
    const headerLen = blob.readUInt16LE(8);
    expect((10 + headerLen) % 64).toBe(0);
    const header = blob.subarray(10, 10 + headerLen).toString("latin1");
    expect(header).toContain("'descr': '<f4'");
    expect(header).toContain("'fortran_order': False");
    expect(header).toContain("'shape': (2, 2, 2, 1)");
    expect(header.endsWith("\n")).toBe(true);
  });

  it("rejects shape/data mismatches", () => {
    expect(() => writeNpy(tmpFile("bad.npy"), new Float32Array(5), [2, 3])).toThrow();
  });

  it("rejects non-npy files", () => {
    const file = tmpFile("junk.npy");
    fs.writeFileSync(file, "hello");
    expect(() => readNpy(file)).toThrow(/not an NPY/);
  });
});
