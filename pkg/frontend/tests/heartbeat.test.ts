import { execFileSync } from "node:child_process";
import * as dgram from "node:dgram";
import { describe, expect, it } from "vitest";

import {
  BadFlags,
  BadLength,
  BadMagic,
  DecodeError,
  UnsupportedVersion,
} from "../src/errors.js";
import {
  decodeHeartbeat,
  encodeHeartbeat,
  HEARTBEAT_SIZE,
  HeartbeatSender,
  parseEndpoint,
} from "../src/heartbeat.js";

const MESSAGE = {
  nodeId: 0x0203,
  incarnation: 0x11223344,
  sequence: 7,
  timestampUs: 1_699_999_999_999_999,
};

// Independent assembly via DataView so the expectation shares no code
// with the encoder under test.
function referenceBytes(): Uint8Array {
  const out = new Uint8Array(HEARTBEAT_SIZE);
  const view = new DataView(out.buffer);
  view.setUint32(0, 0x44454c41, true);
  view.setUint8(4, 1);
  view.setUint8(5, 0);
  view.setUint16(6, MESSAGE.nodeId, true);
  view.setUint32(8, MESSAGE.incarnation, true);
  view.setBigUint64(12, BigInt(MESSAGE.sequence), true);
  view.setBigUint64(20, BigInt(MESSAGE.timestampUs), true);
  return out;
}

describe("heartbeat codec", () => {
  it("matches the independently assembled reference bytes", () => {
    expect(Buffer.compare(encodeHeartbeat(MESSAGE), Buffer.from(referenceBytes()))).toBe(0);
  });

  it("emits the exact bytes the native encoder emits", () => {
    const script = [
      "from faultstep.detector import HeartbeatMessage, encode_heartbeat",
      `msg = HeartbeatMessage(node_id=${MESSAGE.nodeId}, incarnation=${MESSAGE.incarnation}, sequence=${MESSAGE.sequence}, timestamp_us=${MESSAGE.timestampUs})`,
      "print(encode_heartbeat(msg).hex())",
    ].join("\n");
    const native = execFileSync("python3", ["-c", script], { encoding: "utf-8" }).trim();
    expect(encodeHeartbeat(MESSAGE).toString("hex")).toBe(native);
  });

  it("round-trips every field", () => {
    const decoded = decodeHeartbeat(encodeHeartbeat(MESSAGE));
    expect(decoded).toEqual(MESSAGE);
  });

  it("rejects wrong lengths with the byte count", () => {
    expect(() => decodeHeartbeat(new Uint8Array(27))).toThrow(BadLength);
    expect(() => decodeHeartbeat(new Uint8Array(27))).toThrow(
      "expected 28 bytes, got 27",
    );
    expect(() => decodeHeartbeat(new Uint8Array(0))).toThrow(
      "expected 28 bytes, got 0",
    );
  });

  it("rejects a wrong magic, uppercase hex in the message", () => {
    const data = encodeHeartbeat(MESSAGE);
    data.writeUInt32LE(0xdeadbeef, 0);
    expect(() => decodeHeartbeat(data)).toThrow(BadMagic);
    expect(() => decodeHeartbeat(data)).toThrow("bad heartbeat magic 0xDEADBEEF");
  });

  it("rejects unknown versions and nonzero flags", () => {
    const version = encodeHeartbeat(MESSAGE);
    version.writeUInt8(9, 4);
    expect(() => decodeHeartbeat(version)).toThrow(UnsupportedVersion);
    expect(() => decodeHeartbeat(version)).toThrow("heartbeat version 9");
    const flags = encodeHeartbeat(MESSAGE);
    flags.writeUInt8(0x0a, 5);
    expect(() => decodeHeartbeat(flags)).toThrow(BadFlags);
    expect(() => decodeHeartbeat(flags)).toThrow("nonzero flags 0x0A");
  });

  it("groups every decode failure under one error family", () => {
    for (const bad of [new Uint8Array(5), encodeHeartbeat(MESSAGE).fill(0)]) {
      expect(() => decodeHeartbeat(bad)).toThrow(DecodeError);
    }
  });
});

describe("parseEndpoint", () => {
  it("splits on the last colon", () => {
    expect(parseEndpoint("127.0.0.1:9000")).toEqual({ host: "127.0.0.1", port: 9000 });
    expect(parseEndpoint("localhost:1")).toEqual({ host: "localhost", port: 1 });
  });

  it("rejects strings without a host part", () => {
    expect(() => parseEndpoint("9000")).toThrow(RangeError);
    expect(() => parseEndpoint(":9000")).toThrow("endpoint must be host:port");
  });
});

describe("HeartbeatSender", () => {
  it("sends decodable datagrams with an increasing sequence", async () => {
    const received: Buffer[] = [];
    const receiver = dgram.createSocket("udp4");
    const port = await new Promise<number>((resolve) => {
      receiver.on("message", (msg) => received.push(Buffer.from(msg)));
      receiver.bind(0, "127.0.0.1", () => resolve(receiver.address().port));
    });
    const sender = new HeartbeatSender(`127.0.0.1:${port}`, 12, 3, 20);
    try {
      const deadline = Date.now() + 5000;
      while (received.length < 3 && Date.now() < deadline) {
        await new Promise((resolve) => setTimeout(resolve, 10));
      }
    } finally {
      sender.close();
      receiver.close();
    }
    expect(received.length).toBeGreaterThanOrEqual(3);
    const messages = received.map((d) => decodeHeartbeat(d));
    for (const [i, msg] of messages.entries()) {
      expect(msg.nodeId).toBe(12);
      expect(msg.incarnation).toBe(3);
      expect(msg.sequence).toBe(i);
      expect(msg.timestampUs).toBeGreaterThan(0);
    }
  });
});
