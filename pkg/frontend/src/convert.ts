/**
 * RadioML2016.10a pickle -> HisarIQ container conversion.
 *
 * Entries are emitted sorted by (modulation id, snr, in-cell index) so the
 * output is deterministic regardless of dict ordering. Samples pass
 * through bit-exactly as float32.
 */

import { createHash } from "crypto";
import * as fs from "fs";
import * as path from "path";

import {
  CHANNEL_UNKNOWN_UPSTREAM, FAMILY_IDS, RADIOML_CLASSES, RADIOML_FAMILIES,
  UPSTREAM_ALIASES, encodeRecord, header, modulationId,
} from "./container";
import { NDArray, loads, parseTupleKey } from "./pickle";

export class ConversionError extends Error {}

export interface SourceEntry {
  modulation: string;
  snrDb: number;
  /** Raw (2, n) float32 block, row 0 = I, row 1 = Q. */
  frames: Buffer[];
  samplesPerRecord: number;
}

export interface Census {
  counts: Map<string, number>; // "mod|snr" -> record count
  modulations: string[];
  snrLevels: number[];
  skipped: string[];
}

export function censusKey(modulation: string, snrDb: number): string {
  return `${modulation}|${snrDb}`;
}

export function readSource(sourcePath: string,
                           skipUnknown = false): { entries: SourceEntry[]; skipped: string[] } {
  const dict = loads(fs.readFileSync(sourcePath));
  const entries: SourceEntry[] = [];
  const skipped: string[] = [];
  for (const [key, value] of dict) {
    const [rawName, snr] = parseTupleKey(key);
    const name = UPSTREAM_ALIASES[rawName] ?? rawName;
    if (!(name in RADIOML_FAMILIES)) {
      if (skipUnknown) {
        skipped.push(rawName);
        continue;
      }
      throw new ConversionError(
        `unknown modulation key ${JSON.stringify(rawName)} in source file`);
    }
    if (!(value instanceof NDArray)) {
      throw new ConversionError(`entry (${name}, ${snr}) is not an ndarray`);
    }
    if (value.shape.length !== 3 || value.shape[1] !== 2) {
      throw new ConversionError(
        `entry (${name}, ${snr}) has shape (${value.shape.join(", ")}), ` +
        `expected (count, 2, n)`);
    }
    if (value.dtype !== "f4" || !value.littleEndian || value.fortranOrder) {
      throw new ConversionError(
        `entry (${name}, ${snr}) is not little-endian float32 C-order ` +
        `(dtype ${value.dtype})`);
    }
    const [count, , n] = value.shape;
    if (value.data.length !== count * 2 * n * 4) {
      throw new ConversionError(
        `entry (${name}, ${snr}) data has ${value.data.length} bytes, ` +
        `expected ${count * 2 * n * 4}`);
    }
    const frames: Buffer[] = [];
    for (let i = 0; i < count; i++) {
      frames.push(value.data.subarray(i * 8 * n, (i + 1) * 8 * n));
    }
    entries.push({ modulation: name, snrDb: snr, frames, samplesPerRecord: n });
  }
  return { entries, skipped };
}

export interface ConversionResult {
  recordCount: number;
  samplesPerRecord: number;
  census: Census;
  dataPath: string;
  manifestPath: string;
}

export function convert(sourcePath: string, outDir: string,
                        seed = 0, skipUnknown = false): ConversionResult {
  const { entries, skipped } = readSource(sourcePath, skipUnknown);
  if (entries.length === 0) throw new ConversionError("source has no entries");
  const spr = entries[0].samplesPerRecord;
  for (const entry of entries) {
    if (entry.samplesPerRecord !== spr) {
      throw new ConversionError(
        `entry (${entry.modulation}, ${entry.snrDb}) has ` +
        `${entry.samplesPerRecord} samples, others have ${spr}`);
    }
  }
  entries.sort((a, b) =>
    modulationId(a.modulation) - modulationId(b.modulation) || a.snrDb - b.snrDb);

  fs.mkdirSync(outDir, { recursive: true });
  const dataPath = path.join(outDir, "data.hiq");
  const recordCount = entries.reduce((acc, e) => acc + e.frames.length, 0);
  const fd = fs.openSync(dataPath, "w");
  const counts = new Map<string, number>();
  try {
    fs.writeSync(fd, header(recordCount, spr));
    for (const entry of entries) {
      const meta = {
        modulationId: modulationId(entry.modulation),
        familyId: FAMILY_IDS[RADIOML_FAMILIES[entry.modulation]],
        channelId: CHANNEL_UNKNOWN_UPSTREAM,
        snrDb: entry.snrDb,
        seed: 0n,
      };
      for (const frame of entry.frames) {
        fs.writeSync(fd, encodeRecord(meta, frame, spr));
      }
      counts.set(censusKey(entry.modulation, entry.snrDb), entry.frames.length);
    }
  } finally {
    fs.closeSync(fd);
  }

  const census: Census = {
    counts,
    modulations: [...new Set(entries.map((e) => e.modulation))],
    snrLevels: [...new Set(entries.map((e) => e.snrDb))].sort((a, b) => a - b),
    skipped,
  };
  const manifestPath = path.join(outDir, "manifest.txt");
  fs.writeFileSync(manifestPath,
                   manifestText(sourcePath, recordCount, spr, seed, census));
  return { recordCount, samplesPerRecord: spr, census, dataPath, manifestPath };
}

function manifestText(sourcePath: string, recordCount: number, spr: number,
                      seed: number, census: Census): string {
  const perCell = [...census.counts.values()];
  const uniform = perCell.every((c) => c === perCell[0]) ? perCell[0] : 0;
  const hash = createHash("sha256").update(fs.readFileSync(sourcePath))
    .digest("hex");
  const lines = [
    "format=hisariq-manifest",
    "version=1",
    `record_count=${recordCount}`,
    `samples_per_record=${spr}`,
    `master_seed=${seed}`,
    `signals_per_cell=${uniform}`,
    `snr_grid=${census.snrLevels.join(",")}`,
    `modulations=${census.modulations.join(",")}`,
    "channels=unknown-upstream",
    `config_hash=${hash}`,
  ];
  if (census.skipped.length) {
    lines.push(`skipped_modulations=${[...new Set(census.skipped)].join(",")}`);
  }
  return lines.join("\n") + "\n";
}

export function printCensus(census: Census, recordCount: number): string {
  const lines: string[] = [];
  const mods = [...census.modulations];
  for (const mod of mods) {
    const cells = census.snrLevels
      .map((snr) => census.counts.get(censusKey(mod, snr)) ?? 0);
    lines.push(`${mod.padEnd(8)} ${cells.join(" ")}`);
  }
  lines.push(`modulations: ${mods.length}, snr levels: ` +
    `${census.snrLevels.length}, records: ${recordCount}`);
  if (census.skipped.length) {
    lines.push(`skipped unknown modulations: ` +
      `${[...new Set(census.skipped)].join(", ")}`);
  }
  return lines.join("\n");
}
