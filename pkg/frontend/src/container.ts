/**
 * HisarIQ container I/O (writer plus a verification reader).
 *
 * Byte layout, little-endian throughout:
 *   magic "HIQ1" | version u16 | record count u64 | samples/record u32
 *   per record: modulation u16, family u8, channel u8, snr i16,
 *               reserved u16, seed u64, then float32 interleaved I,Q.
 *
 * The modulation id registry is shared with the primary toolchain:
 * native catalog variants take 0..25, the ten upstream RadioML2016.10a
 * class names take 32..41.
 */

export const MAGIC = "HIQ1";
export const VERSION = 1;

export const RADIOML_CLASSES = [
  "AM-DSB", "WBFM", "GFSK", "CPFSK", "4-PAM",
  "BPSK", "QPSK", "8-PSK", "16-QAM", "64-QAM",
] as const;
export const RADIOML_ID_BASE = 32;

export const FAMILY_IDS: Record<string, number> = {
  analog: 0, fsk: 1, pam: 2, psk: 3, qam: 4,
};

export const RADIOML_FAMILIES: Record<string, string> = {
  "AM-DSB": "analog", WBFM: "analog", GFSK: "fsk", CPFSK: "fsk",
  "4-PAM": "pam", BPSK: "psk", QPSK: "psk", "8-PSK": "psk",
  "16-QAM": "qam", "64-QAM": "qam",
};

/** Upstream file spellings for the four names the registry hyphenates. */
export const UPSTREAM_ALIASES: Record<string, string> = {
  PAM4: "4-PAM", "8PSK": "8-PSK", QAM16: "16-QAM", QAM64: "64-QAM",
};

export const CHANNEL_UNKNOWN_UPSTREAM = 255;

export interface RecordMeta {
  modulationId: number;
  familyId: number;
  channelId: number;
  snrDb: number;
  seed: bigint;
}

export const HEADER_SIZE = 4 + 2 + 8 + 4;
export const RECORD_META_SIZE = 16;

export function modulationId(name: string): number {
  const index = (RADIOML_CLASSES as readonly string[]).indexOf(name);
  if (index < 0) throw new Error(`not an upstream class name: ${name}`);
  return RADIOML_ID_BASE + index;
}

export function recordSize(samplesPerRecord: number): number {
  return RECORD_META_SIZE + 8 * samplesPerRecord;
}

export function header(recordCount: number, samplesPerRecord: number): Buffer {
  const buf = Buffer.alloc(HEADER_SIZE);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(VERSION, 4);
  buf.writeBigUInt64LE(BigInt(recordCount), 6);
  buf.writeUInt32LE(samplesPerRecord, 14);
  return buf;
}

/**
 * One record: metadata plus the raw (2, n) float32 sample block from the
 * source array, interleaved to I,Q pairs byte-for-byte (no float
 * round-trip, so NaN payloads and signed zeros survive).
 */
export function encodeRecord(meta: RecordMeta, rawIQ: Buffer,
                             samplesPerRecord: number): Buffer {
  const expected = 8 * samplesPerRecord;
  if (rawIQ.length !== expected) {
    throw new Error(
      `sample block is ${rawIQ.length} bytes, expected ${expected}`);
  }
  const buf = Buffer.alloc(recordSize(samplesPerRecord));
  buf.writeUInt16LE(meta.modulationId, 0);
  buf.writeUInt8(meta.familyId, 2);
  buf.writeUInt8(meta.channelId, 3);
  buf.writeInt16LE(meta.snrDb, 4);
  buf.writeUInt16LE(0, 6);
  buf.writeBigUInt64LE(meta.seed, 8);
  const half = 4 * samplesPerRecord;
  for (let k = 0; k < samplesPerRecord; k++) {
    // Row 0 of the source array is I, row 1 is Q.
    rawIQ.copy(buf, RECORD_META_SIZE + 8 * k, 4 * k, 4 * k + 4);
    rawIQ.copy(buf, RECORD_META_SIZE + 8 * k + 4, half + 4 * k, half + 4 * k + 4);
  }
  return buf;
}

export interface ParsedContainer {
  samplesPerRecord: number;
  records: { meta: RecordMeta; iq: Buffer }[];
}

export function parseContainer(raw: Buffer): ParsedContainer {
  if (raw.length < HEADER_SIZE || raw.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("bad container magic at offset 0");
  }
  const version = raw.readUInt16LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const count = Number(raw.readBigUInt64LE(6));
  const spr = raw.readUInt32LE(14);
  const expected = HEADER_SIZE + count * recordSize(spr);
  if (raw.length !== expected) {
    throw new Error(
      `file ends at offset ${raw.length}, expected ${expected}`);
  }
  const records = [];
  let offset = HEADER_SIZE;
  for (let i = 0; i < count; i++) {
    const meta: RecordMeta = {
      modulationId: raw.readUInt16LE(offset),
      familyId: raw.readUInt8(offset + 2),
      channelId: raw.readUInt8(offset + 3),
      snrDb: raw.readInt16LE(offset + 4),
      seed: raw.readBigUInt64LE(offset + 8),
    };
    const iq = raw.subarray(offset + RECORD_META_SIZE,
                            offset + recordSize(spr));
    records.push({ meta, iq: Buffer.from(iq) });
    offset += recordSize(spr);
  }
  return { samplesPerRecord: spr, records };
}
