/**
 * Command line:
 *   ts-node src/cli.ts train    --data DIR --out CKPT [--epochs 5] [--seed 0]
 *                               [--dropout 0.2] [--base-filters 4] [--conv-units 4]
 *   ts-node src/cli.ts infer-mc --checkpoint CKPT --image IMG.pgm --out VOL.npy
 *                               [--passes 10]
 *   ts-node src/cli.ts infer-tta --checkpoint CKPT --image IMG.pgm --out VOL.npy
 *                               --manifest M.json [--passes 10] [--seed 0]
 *                               [--image-id ID]
 */

import { inferMc, inferTta } from "./infer";
import { readPgm } from "./raster";
import { train } from "./train";
import { DEFAULT_SPEC } from "./unet";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${argv[i]}`);
    }
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  return args;
}

function required(args: Map<string, string>, key: string): string {
  const value = args.get(key);
  if (value === undefined) throw new Error(`missing --${key}`);
  return value;
}

function main(): number {
  const [command, ...rest] = process.argv.slice(2);
  const args = parseArgs(rest);
  switch (command) {
    case "train": {
      const spec = {
        ...DEFAULT_SPEC,
        seed: parseInt(args.get("seed") ?? "0", 10),
        dropoutRate: parseFloat(args.get("dropout") ?? String(DEFAULT_SPEC.dropoutRate)),
        baseFilters: parseInt(args.get("base-filters") ?? String(DEFAULT_SPEC.baseFilters), 10),
        convUnitsPerBlock: parseInt(
          args.get("conv-units") ?? String(DEFAULT_SPEC.convUnitsPerBlock),
          10
        ),
      };
      const epochs = parseInt(args.get("epochs") ?? "5", 10);
      const { lossLog } = train(required(args, "data"), required(args, "out"), spec, epochs);
      console.log(`trained ${epochs} epochs; final loss ${lossLog[lossLog.length - 1].toFixed(5)}`);
      return 0;
    }
    case "infer-mc": {
      const img = readPgm(required(args, "image"));
      inferMc(
        required(args, "checkpoint"),
        img,
        parseInt(args.get("passes") ?? "10", 10),
        required(args, "out")
      );
      console.log(`wrote ${args.get("out")}`);
      return 0;
    }
    case "infer-tta": {
      const img = readPgm(required(args, "image"));
      inferTta(
        required(args, "checkpoint"),
        img,
        parseInt(args.get("passes") ?? "10", 10),
        parseInt(args.get("seed") ?? "0", 10),
        required(args, "out"),
        required(args, "manifest"),
        args.get("image-id") ?? "0"
      );
      console.log(`wrote ${args.get("out")} and ${args.get("manifest")}`);
      return 0;
    }
    default:
      console.error("usage: cli.ts <train|infer-mc|infer-tta> [--flag value ...]");
      return 2;
  }
}

try {
  process.exit(main());
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
}
