import { describe, expect, it } from "vitest";

import {
  ACTION_DATAGRAM_SIZE,
  Gear,
  SENSOR_DATAGRAM_SIZE,
  WireError,
  decodeAction,
  decodeCameraPayload,
  decodeSensor,
  encodeAction,
  encodeCameraFrame,
  encodeSensor,
} from "../src/wire.js";

// deterministic pseudo-random values for property-style loops
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("action datagram", () => {
  it("matches the normative 29-byte layout", () => {
    const data = encodeAction({ seq: 1, steering: 0, acceleration: 0, gear: Gear.Drive });
    expect(data.length).toBe(ACTION_DATAGRAM_SIZE);
    expect(data.toString("ascii", 0, 4)).toBe("L2RA");
    expect(data[28]).toBe(1);
  });

  it("round-trips random messages bit-exactly", () => {
    const rand = mulberry32(7);
    for (let i = 0; i < 2000; i++) {
      const message = {
        seq: Math.floor(rand() * 2 ** 32),
        steering: (rand() - 0.5) * 2e6,
        acceleration: (rand() - 0.5) * 2e6,
        gear: Math.floor(rand() * 4) as Gear,
      };
      expect(decodeAction(encodeAction(message))).toEqual(message);
    }
  });

  it("rejects short datagrams", () => {
    const data = encodeAction({ seq: 1, steering: 0, acceleration: 0, gear: Gear.Park });
    expect(() => decodeAction(data.subarray(0, 28))).toThrow(WireError);
  });

  it("rejects bad magic and bad gear", () => {
    const data = encodeAction({ seq: 1, steering: 0, acceleration: 0, gear: Gear.Park });
    const badMagic = Buffer.from(data);
    badMagic.write("XXXX", 0, "ascii");
    expect(() => decodeAction(badMagic)).toThrow(/bad_magic/);
    const badGear = Buffer.from(data);
    badGear[28] = 9;
    expect(() => decodeAction(badGear)).toThrow(/bad_gear/);
  });
});

describe("sensor datagram", () => {
  it("is 256 bytes with yaw at offset 112", () => {
    const values = new Float64Array(30);
    values[12] = 1.25;
    const data = encodeSensor({ seq: 0, simTime: 0, values });
    expect(data.length).toBe(SENSOR_DATAGRAM_SIZE);
    expect(data.toString("ascii", 0, 4)).toBe("L2RS");
    expect(data.readDoubleLE(112)).toBe(1.25);
  });

  it("round-trips random vectors bit-exactly", () => {
    const rand = mulberry32(21);
    for (let i = 0; i < 2000; i++) {
      const values = new Float64Array(30);
      for (let k = 0; k < 30; k++) {
        values[k] = (rand() - 0.5) * 1e4;
      }
      const message = { seq: i, simTime: rand() * 1e4, values };
      const decoded = decodeSensor(encodeSensor(message));
      expect(decoded.seq).toBe(message.seq);
      expect(decoded.simTime).toBe(message.simTime);
      expect(Array.from(decoded.values)).toEqual(Array.from(values));
    }
  });

  it("rejects wrong-length datagrams", () => {
    expect(() => decodeSensor(Buffer.alloc(252))).toThrow(/bad_length/);
  });
});

describe("camera frame", () => {
  it("computes the documented payload length", () => {
    const frame = {
      seq: 1,
      simTime: 0,
      width: 192,
      height: 192,
      channels: 3,
      pixels: new Uint8Array(192 * 192 * 3),
    };
    const data = encodeCameraFrame(frame);
    expect(data.readUInt32LE(0)).toBe(110609);
  });

  it("round-trips frames", () => {
    const rand = mulberry32(3);
    for (let i = 0; i < 200; i++) {
      const width = 1 + Math.floor(rand() * 32);
      const height = 1 + Math.floor(rand() * 32);
      const channels = 1 + Math.floor(rand() * 3);
      const pixels = new Uint8Array(width * height * channels);
      for (let k = 0; k < pixels.length; k++) {
        pixels[k] = Math.floor(rand() * 256);
      }
      const frame = { seq: i, simTime: rand() * 100, width, height, channels, pixels };
      const decoded = decodeCameraPayload(encodeCameraFrame(frame).subarray(4));
      expect(decoded).toEqual(frame);
    }
  });

  it("rejects pixel-length mismatches", () => {
    const frame = {
      seq: 0,
      simTime: 0,
      width: 4,
      height: 4,
      channels: 1,
      pixels: new Uint8Array(16),
    };
    const payload = encodeCameraFrame(frame).subarray(4, 4 + 17 + 13);
    expect(() => decodeCameraPayload(Buffer.from(payload))).toThrow(/bad_length/);
  });
});
