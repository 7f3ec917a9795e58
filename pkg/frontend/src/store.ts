/**
 * Crash-safe checkpoint persistence, byte-compatible with the core.
 *
 * One checkpoint is one file: bytes go to a `.tmp` sibling, are flushed,
 * then renamed into place. Readers validate magic, header checksum,
 * entry-table shape, and payload checksums, and skip files that fail.
 *
 * File layout, little-endian throughout:
 *
 *     magic        8 bytes  "DLCKPT01"
 *     version      u16      1
 *     epoch        u64
 *     created_at   u64      microseconds since the Unix epoch
 *     entry count  u32
 *     entry table, one record per segment:
 *         id length   u8
 *         id bytes    (UTF-8)
 *         scope tag   u8    0 = global, 1 = local
 *         worker id   u32   0 when global
 *         offset      u64   into the payload region
 *         length      u64
 *         checksum    u32   CRC-32 of the payload bytes
 *     header CRC   u32      CRC-32 over all preceding bytes
 *     payloads     concatenated, contiguous, in entry order
 *
 * The CRC-32 is the IEEE one (polynomial 0x04C11DB7, reflected, initial
 * and final XOR 0xFFFFFFFF), i.e. zlib's.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as zlib from "node:zlib";

import { InvalidSnapshot, IoFailure, NonMonotonicEpoch } from "./errors.js";
import { MAX_SEGMENT_BYTES, SegmentScope, pyRepr } from "./registry.js";

export const MAGIC = Buffer.from("DLCKPT01", "latin1");
export const FORMAT_VERSION = 1;
export const FILE_SUFFIX = ".dck";
export const TMP_SUFFIX = ".tmp";

const FIXED_HEADER_SIZE = 30; // magic 8 + u16 + u64 + u64 + u32
const ENTRY_TAIL_SIZE = 25; // u8 + u32 + u64 + u64 + u32
const CRC_SIZE = 4;

const SCOPE_GLOBAL = 0;
const SCOPE_LOCAL = 1;

const FILENAME_RE = /^ckpt-(\d{10})\.dck$/;

export const VERDICT_VALID = "valid";
export const VERDICT_BAD_MAGIC = "invalid: bad magic";
export const VERDICT_TRUNCATED_HEADER = "invalid: truncated header";
export const VERDICT_UNSUPPORTED_VERSION = "invalid: unsupported version";
export const VERDICT_TRUNCATED_TABLE = "invalid: truncated entry table";
export const VERDICT_HEADER_CRC = "invalid: header checksum mismatch";
export const VERDICT_MALFORMED_TABLE = "invalid: malformed entry table";
export const VERDICT_TRUNCATED_PAYLOAD = "invalid: truncated payload region";
export const VERDICT_PAYLOAD_SIZE = "invalid: payload region size mismatch";
export const VERDICT_PAYLOAD_CRC = "invalid: payload checksum mismatch";

export function crc32(data: Uint8Array): number {
  return zlib.crc32(data);
}

export function checkpointFilename(epoch: number): string {
  return `ckpt-${String(epoch).padStart(10, "0")}${FILE_SUFFIX}`;
}

export interface SegmentEntry {
  readonly id: string;
  readonly scope: SegmentScope;
  readonly offset: number;
  readonly length: number;
  readonly checksum: number;
}

export interface CheckpointManifest {
  readonly epoch: number;
  readonly createdAtUs: number;
  readonly entries: readonly SegmentEntry[];
  readonly committed: boolean;
}

export interface StoredSegment {
  readonly id: string;
  readonly scope: SegmentScope;
  readonly payload: Uint8Array;
}

export interface FileReport {
  verdict: string;
  size: number;
  formatVersion?: number;
  epoch?: number;
  createdAtUs?: number;
  entryCount?: number;
  entries: SegmentEntry[];
  payloads?: Uint8Array[];
}

export function isValid(report: FileReport): boolean {
  return report.verdict === VERDICT_VALID;
}

/** Anything with the three attributes a registry snapshot carries. */
export interface EncodableSegment {
  readonly id: string;
  readonly scope: SegmentScope;
  readonly payload: Uint8Array;
}

// -- encoding ----------------------------------------------------------------

export function encodeCheckpoint(
  epoch: number,
  segments: readonly EncodableSegment[],
  createdAtUs: number,
): Buffer {
  if (!Number.isInteger(epoch) || epoch < 0) {
    throw new RangeError("epoch must be non-negative");
  }
  const ids = segments.map((s) => Buffer.from(s.id, "utf-8"));
  for (let i = 0; i < segments.length; i++) {
    if (ids[i].length < 1 || ids[i].length > 255) {
      throw new InvalidSnapshot(
        `segment id ${pyRepr(segments[i].id)} has invalid length`,
      );
    }
    if (segments[i].payload.byteLength > MAX_SEGMENT_BYTES) {
      throw new InvalidSnapshot(
        `segment ${pyRepr(segments[i].id)} payload too large`,
      );
    }
  }
  for (let i = 1; i < ids.length; i++) {
    if (Buffer.compare(ids[i - 1], ids[i]) >= 0) {
      throw new InvalidSnapshot("snapshot ids must be strictly ascending by bytes");
    }
  }

  let tableSize = FIXED_HEADER_SIZE;
  for (const id of ids) tableSize += 1 + id.length + ENTRY_TAIL_SIZE;
  const header = Buffer.alloc(tableSize);
  MAGIC.copy(header, 0);
  header.writeUInt16LE(FORMAT_VERSION, 8);
  header.writeBigUInt64LE(BigInt(epoch), 10);
  header.writeBigUInt64LE(BigInt(createdAtUs), 18);
  header.writeUInt32LE(segments.length, 26);

  let pos = FIXED_HEADER_SIZE;
  let offset = 0n;
  for (let i = 0; i < segments.length; i++) {
    const seg = segments[i];
    const id = ids[i];
    header.writeUInt8(id.length, pos);
    pos += 1;
    id.copy(header, pos);
    pos += id.length;
    header.writeUInt8(seg.scope.isGlobal ? SCOPE_GLOBAL : SCOPE_LOCAL, pos);
    header.writeUInt32LE(seg.scope.isGlobal ? 0 : seg.scope.worker!, pos + 1);
    header.writeBigUInt64LE(offset, pos + 5);
    header.writeBigUInt64LE(BigInt(seg.payload.byteLength), pos + 13);
    header.writeUInt32LE(crc32(seg.payload), pos + 21);
    pos += ENTRY_TAIL_SIZE;
    offset += BigInt(seg.payload.byteLength);
  }

  const headerCrc = Buffer.alloc(CRC_SIZE);
  headerCrc.writeUInt32LE(crc32(header), 0);
  return Buffer.concat([
    header,
    headerCrc,
    ...segments.map((s) => Buffer.from(s.payload)),
  ]);
}

// -- decoding and validation -------------------------------------------------

/** Classify checkpoint bytes, parsing as far as the bytes allow. */
export function analyze(input: Uint8Array): FileReport {
  const data = Buffer.isBuffer(input) ? input : Buffer.from(input);
  const report: FileReport = {
    verdict: VERDICT_VALID,
    size: data.length,
    entries: [],
  };

  if (data.length < FIXED_HEADER_SIZE) {
    const prefix = data.subarray(0, Math.min(data.length, MAGIC.length));
    if (Buffer.compare(prefix, MAGIC.subarray(0, prefix.length)) !== 0) {
      report.verdict = VERDICT_BAD_MAGIC;
    } else {
      report.verdict = VERDICT_TRUNCATED_HEADER;
    }
    return report;
  }
  if (Buffer.compare(data.subarray(0, 8), MAGIC) !== 0) {
    report.verdict = VERDICT_BAD_MAGIC;
    return report;
  }
  const version = data.readUInt16LE(8);
  report.formatVersion = version;
  if (version !== FORMAT_VERSION) {
    report.verdict = VERDICT_UNSUPPORTED_VERSION;
    return report;
  }
  report.epoch = Number(data.readBigUInt64LE(10));
  report.createdAtUs = Number(data.readBigUInt64LE(18));
  const count = data.readUInt32LE(26);
  report.entryCount = count;

  let pos = FIXED_HEADER_SIZE;
  const rawIds: Buffer[] = [];
  const rawOffsets: bigint[] = [];
  const rawLengths: bigint[] = [];
  for (let i = 0; i < count; i++) {
    if (pos + 1 > data.length) {
      report.verdict = VERDICT_TRUNCATED_TABLE;
      return report;
    }
    const idLen = data.readUInt8(pos);
    pos += 1;
    if (pos + idLen + ENTRY_TAIL_SIZE > data.length) {
      report.verdict = VERDICT_TRUNCATED_TABLE;
      return report;
    }
    const rawId = data.subarray(pos, pos + idLen);
    pos += idLen;
    const tag = data.readUInt8(pos);
    const worker = data.readUInt32LE(pos + 1);
    const offset = data.readBigUInt64LE(pos + 5);
    const length = data.readBigUInt64LE(pos + 13);
    const checksum = data.readUInt32LE(pos + 21);
    pos += ENTRY_TAIL_SIZE;
    if (tag !== SCOPE_GLOBAL && tag !== SCOPE_LOCAL) {
      report.verdict = VERDICT_MALFORMED_TABLE;
      return report;
    }
    let scope: SegmentScope;
    if (tag === SCOPE_GLOBAL) {
      if (worker !== 0) {
        report.verdict = VERDICT_MALFORMED_TABLE;
        return report;
      }
      scope = SegmentScope.globalScope();
    } else {
      scope = SegmentScope.local(worker);
    }
    rawIds.push(Buffer.from(rawId));
    rawOffsets.push(offset);
    rawLengths.push(length);
    report.entries.push({
      id: rawId.toString("utf-8"),
      scope,
      offset: Number(offset),
      length: Number(length),
      checksum,
    });
  }
  if (pos + CRC_SIZE > data.length) {
    report.verdict = VERDICT_TRUNCATED_TABLE;
    return report;
  }
  const storedCrc = data.readUInt32LE(pos);
  if (crc32(data.subarray(0, pos)) !== storedCrc) {
    report.verdict = VERDICT_HEADER_CRC;
    return report;
  }
  pos += CRC_SIZE;

  // Structural rules: ids strictly ascending and unique, payload regions
  // contiguous in entry order, global entries carry worker id 0.
  let expectedOffset = 0n;
  for (let i = 0; i < rawIds.length; i++) {
    if (rawIds[i].length === 0) {
      report.verdict = VERDICT_MALFORMED_TABLE;
      return report;
    }
    if (rawOffsets[i] !== expectedOffset) {
      report.verdict = VERDICT_MALFORMED_TABLE;
      return report;
    }
    expectedOffset += rawLengths[i];
  }
  for (let i = 1; i < rawIds.length; i++) {
    if (Buffer.compare(rawIds[i - 1], rawIds[i]) >= 0) {
      report.verdict = VERDICT_MALFORMED_TABLE;
      return report;
    }
  }

  const available = BigInt(data.length - pos);
  if (available < expectedOffset) {
    report.verdict = VERDICT_TRUNCATED_PAYLOAD;
    return report;
  }
  if (available > expectedOffset) {
    report.verdict = VERDICT_PAYLOAD_SIZE;
    return report;
  }

  const payloads: Uint8Array[] = [];
  for (const entry of report.entries) {
    const payload = data.subarray(
      pos + entry.offset,
      pos + entry.offset + entry.length,
    );
    if (crc32(payload) !== entry.checksum) {
      report.verdict = VERDICT_PAYLOAD_CRC;
      return report;
    }
    payloads.push(Buffer.from(payload));
  }
  report.payloads = payloads;
  return report;
}

/** Decode valid checkpoint bytes; throws IoFailure on invalid data. */
export function decodeCheckpoint(
  data: Uint8Array,
  committed = false,
): { manifest: CheckpointManifest; segments: StoredSegment[] } {
  const report = analyze(data);
  if (!isValid(report)) {
    throw new IoFailure(`checkpoint rejected: ${report.verdict}`);
  }
  const manifest: CheckpointManifest = {
    epoch: report.epoch!,
    createdAtUs: report.createdAtUs!,
    entries: report.entries,
    committed,
  };
  const segments = report.entries.map((e, i) => ({
    id: e.id,
    scope: e.scope,
    payload: report.payloads![i],
  }));
  return { manifest, segments };
}

// -- directory operations ----------------------------------------------------

/** Epochs of committed checkpoint files, by file name, ascending. */
export function committedEpochs(directory: string): number[] {
  let names: string[];
  try {
    names = fs.readdirSync(directory);
  } catch (exc) {
    throw new IoFailure(`cannot list ${directory}: ${describe(exc)}`);
  }
  const epochs: number[] = [];
  for (const name of names) {
    const match = FILENAME_RE.exec(name);
    if (match) epochs.push(Number(match[1]));
  }
  epochs.sort((a, b) => a - b);
  return epochs;
}

/**
 * Atomically persist a snapshot as epoch `epoch`.
 *
 * The epoch must be strictly greater than every epoch already committed
 * in the directory. `createdAtUs` defaults to the current wall clock;
 * pin it to make output bytes reproducible. Returns the path of the
 * committed file.
 */
export function commit(
  directory: string,
  epoch: number,
  snapshot: readonly EncodableSegment[],
  createdAtUs?: number,
  durable = true,
): string {
  if (!Number.isInteger(epoch) || epoch < 0) {
    throw new RangeError("epoch must be non-negative");
  }
  const existing = committedEpochs(directory);
  if (existing.length > 0 && epoch <= existing[existing.length - 1]) {
    throw new NonMonotonicEpoch(
      `epoch ${epoch} is not greater than committed epoch ${existing[existing.length - 1]}`,
    );
  }
  const data = encodeCheckpoint(
    epoch,
    snapshot,
    createdAtUs ?? Date.now() * 1000,
  );

  const final = path.join(directory, checkpointFilename(epoch));
  const tmp = final + TMP_SUFFIX;
  try {
    const fd = fs.openSync(tmp, "w", 0o644);
    try {
      fs.writeSync(fd, data);
      if (durable) fs.fsyncSync(fd);
    } finally {
      fs.closeSync(fd);
    }
    fs.renameSync(tmp, final);
    if (durable) fsyncDir(directory);
  } catch (exc) {
    try {
      fs.unlinkSync(tmp);
    } catch {
      // already gone
    }
    throw new IoFailure(`commit of epoch ${epoch} failed: ${describe(exc)}`);
  }
  return final;
}

function fsyncDir(directory: string): void {
  const fd = fs.openSync(directory, "r");
  try {
    fs.fsyncSync(fd);
  } finally {
    fs.closeSync(fd);
  }
}

/** Read and fully validate one checkpoint file. */
export function readCheckpoint(filePath: string): {
  manifest: CheckpointManifest;
  segments: StoredSegment[];
} {
  let data: Buffer;
  try {
    data = fs.readFileSync(filePath);
  } catch (exc) {
    throw new IoFailure(`cannot read ${filePath}: ${describe(exc)}`);
  }
  const committed = FILENAME_RE.test(path.basename(filePath));
  return decodeCheckpoint(data, committed);
}

/**
 * Return the highest-epoch fully-valid checkpoint, or null.
 *
 * Files failing validation are skipped and left in place, as are files
 * whose header epoch disagrees with their name.
 */
export function restoreLatest(
  directory: string,
): { epoch: number; segments: StoredSegment[] } | null {
  const epochs = committedEpochs(directory);
  for (let i = epochs.length - 1; i >= 0; i--) {
    const epoch = epochs[i];
    const filePath = path.join(directory, checkpointFilename(epoch));
    let data: Buffer;
    try {
      data = fs.readFileSync(filePath);
    } catch {
      continue;
    }
    const report = analyze(data);
    if (!isValid(report)) continue;
    if (report.epoch !== epoch) continue;
    const segments = report.entries.map((e, j) => ({
      id: e.id,
      scope: e.scope,
      payload: report.payloads![j],
    }));
    return { epoch, segments };
  }
  return null;
}

function describe(exc: unknown): string {
  return exc instanceof Error ? exc.message : String(exc);
}
