/**
 * Heartbeat datagram codec and a periodic UDP sender.
 *
 * Datagram layout, little-endian, exactly 28 bytes:
 *
 *     magic        u32   0x44454C41
 *     version      u8    1
 *     flags        u8    0
 *     node_id      u16
 *     incarnation  u32   bumped every time the node process restarts
 *     sequence     u64   per-incarnation counter
 *     timestamp_us u64   sender wall clock, informational only
 */

import * as dgram from "node:dgram";

import { BadFlags, BadLength, BadMagic, UnsupportedVersion } from "./errors.js";

export const HEARTBEAT_MAGIC = 0x44454c41;
export const HEARTBEAT_VERSION = 1;
export const HEARTBEAT_SIZE = 28;

export interface HeartbeatMessage {
  readonly nodeId: number;
  readonly incarnation: number;
  readonly sequence: number;
  readonly timestampUs: number;
}

export function encodeHeartbeat(msg: HeartbeatMessage): Buffer {
  const out = Buffer.alloc(HEARTBEAT_SIZE);
  out.writeUInt32LE(HEARTBEAT_MAGIC, 0);
  out.writeUInt8(HEARTBEAT_VERSION, 4);
  out.writeUInt8(0, 5);
  out.writeUInt16LE(msg.nodeId, 6);
  out.writeUInt32LE(msg.incarnation, 8);
  out.writeBigUInt64LE(BigInt(msg.sequence), 12);
  out.writeBigUInt64LE(BigInt(msg.timestampUs), 20);
  return out;
}

/** Decode one datagram; any non-conforming input raises a DecodeError. */
export function decodeHeartbeat(data: Uint8Array): HeartbeatMessage {
  if (data.byteLength !== HEARTBEAT_SIZE) {
    throw new BadLength(`expected ${HEARTBEAT_SIZE} bytes, got ${data.byteLength}`);
  }
  const buf = Buffer.isBuffer(data) ? data : Buffer.from(data);
  const magic = buf.readUInt32LE(0);
  if (magic !== HEARTBEAT_MAGIC) {
    throw new BadMagic(
      `bad heartbeat magic 0x${magic.toString(16).toUpperCase().padStart(8, "0")}`,
    );
  }
  const version = buf.readUInt8(4);
  if (version !== HEARTBEAT_VERSION) {
    throw new UnsupportedVersion(`heartbeat version ${version}`);
  }
  const flags = buf.readUInt8(5);
  if (flags !== 0) {
    throw new BadFlags(
      `nonzero flags 0x${flags.toString(16).toUpperCase().padStart(2, "0")}`,
    );
  }
  return {
    nodeId: buf.readUInt16LE(6),
    incarnation: buf.readUInt32LE(8),
    sequence: Number(buf.readBigUInt64LE(12)),
    timestampUs: Number(buf.readBigUInt64LE(20)),
  };
}

export function parseEndpoint(endpoint: string): { host: string; port: number } {
  const sep = endpoint.lastIndexOf(":");
  if (sep <= 0) {
    throw new RangeError(`endpoint must be host:port, got '${endpoint}'`);
  }
  return { host: endpoint.slice(0, sep), port: Number(endpoint.slice(sep + 1)) };
}

/** Sends one heartbeat per period on a timer until stopped. */
export class HeartbeatSender {
  private readonly socket: dgram.Socket;
  private readonly host: string;
  private readonly port: number;
  private timer: NodeJS.Timeout | null = null;
  private sequence = 0;

  constructor(
    endpoint: string,
    private readonly nodeId: number,
    private readonly incarnation: number,
    periodMs: number,
  ) {
    const { host, port } = parseEndpoint(endpoint);
    this.host = host;
    this.port = port;
    this.socket = dgram.createSocket("udp4");
    this.sendOne();
    this.timer = setInterval(() => this.sendOne(), periodMs);
    this.timer.unref();
  }

  private sendOne(): void {
    const datagram = encodeHeartbeat({
      nodeId: this.nodeId,
      incarnation: this.incarnation,
      sequence: this.sequence,
      timestampUs: Date.now() * 1000,
    });
    this.sequence += 1;
    this.socket.send(datagram, this.port, this.host, () => {
      // Send failures earn no retry; the next period tries again.
    });
  }

  close(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.socket.close();
  }
}
