/**
 * Converter entry point.
 *
 * Usage: node dist/cli.js --in RML2016.10a_dict.pkl --out DIR [--seed N]
 *        [--skip-unknown]
 *
 * Writes DIR/data.hiq, DIR/manifest.txt and the stratified 50/50
 * train.idx/test.idx files, and prints the per-(modulation, snr) census.
 */

import * as fs from "fs";
import * as path from "path";

import { censusKey, convert, printCensus } from "./convert";
import { parseContainer } from "./container";
import { RADIOML_CLASSES, RADIOML_ID_BASE } from "./container";
import { splitHalf } from "./split";

interface Args {
  input: string;
  out: string;
  seed: number;
  skipUnknown: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { seed: 0, skipUnknown: false };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--in":
        args.input = argv[++i];
        break;
      case "--out":
        args.out = argv[++i];
        break;
      case "--seed":
        args.seed = Number(argv[++i]);
        break;
      case "--skip-unknown":
        args.skipUnknown = true;
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!args.input || !args.out) {
    throw new Error("usage: cli --in <source.pkl> --out <dir> [--seed N] " +
      "[--skip-unknown]");
  }
  return args as Args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const result = convert(args.input, args.out, args.seed, args.skipUnknown);
    console.log(printCensus(result.census, result.recordCount));

    const parsed = parseContainer(fs.readFileSync(result.dataPath));
    const cellOf = parsed.records.map((r) => censusKey(
      RADIOML_CLASSES[r.meta.modulationId - RADIOML_ID_BASE], r.meta.snrDb));
    const split = splitHalf(cellOf, args.seed);
    fs.writeFileSync(path.join(args.out, "train.idx"),
                     split.train.map(String).join("\n") + "\n");
    fs.writeFileSync(path.join(args.out, "test.idx"),
                     split.test.map(String).join("\n") + "\n");
    fs.appendFileSync(result.manifestPath,
                      "split.train=train.idx\nsplit.test=test.idx\n");
    console.log(`train: ${split.train.length}, test: ${split.test.length}` +
      (split.oddCells ? ` (${split.oddCells} odd cells, +-1 imbalance)` : ""));
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
