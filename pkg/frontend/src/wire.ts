/**
 * Binary wire formats for the racing simulator protocol (little-endian).
 * Layouts must match the server's protocol.md byte-for-byte.
 */

export const ACTION_MAGIC = "L2RA";
export const SENSOR_MAGIC = "L2RS";
export const ACTION_DATAGRAM_SIZE = 29;
export const SENSOR_DATAGRAM_SIZE = 256;
export const SENSOR_VALUE_COUNT = 30;

export class WireError extends Error {
  constructor(public readonly reason: string, detail = "") {
    super(detail ? `${reason}: ${detail}` : reason);
    this.name = "WireError";
  }
}

export enum Gear {
  Park = 0,
  Drive = 1,
  Neutral = 2,
  Reverse = 3,
}

export interface ActionMessage {
  seq: number;
  steering: number;
  acceleration: number;
  gear: Gear;
}

export interface SensorMessage {
  seq: number;
  simTime: number;
  values: Float64Array; // 30 observation slots
}

export interface CameraFrame {
  seq: number;
  simTime: number;
  width: number;
  height: number;
  channels: number;
  pixels: Uint8Array;
}

export function encodeAction(message: ActionMessage): Buffer {
  const buf = Buffer.alloc(ACTION_DATAGRAM_SIZE);
  buf.write(ACTION_MAGIC, 0, "ascii");
  buf.writeUInt32LE(message.seq >>> 0, 4);
  buf.writeUInt32LE(0, 8); // reserved
  buf.writeDoubleLE(message.steering, 12);
  buf.writeDoubleLE(message.acceleration, 20);
  buf.writeUInt8(message.gear, 28);
  return buf;
}

export function decodeAction(data: Buffer): ActionMessage {
  if (data.length !== ACTION_DATAGRAM_SIZE) {
    throw new WireError("bad_length", `${data.length} != ${ACTION_DATAGRAM_SIZE}`);
  }
  if (data.toString("ascii", 0, 4) !== ACTION_MAGIC) {
    throw new WireError("bad_magic");
  }
  const gear = data.readUInt8(28);
  if (gear > 3) {
    throw new WireError("bad_gear", String(gear));
  }
  return {
    seq: data.readUInt32LE(4),
    steering: data.readDoubleLE(12),
    acceleration: data.readDoubleLE(20),
    gear,
  };
}

export function encodeSensor(message: SensorMessage): Buffer {
  if (message.values.length !== SENSOR_VALUE_COUNT) {
    throw new WireError("bad_values", `expected ${SENSOR_VALUE_COUNT} values`);
  }
  const buf = Buffer.alloc(SENSOR_DATAGRAM_SIZE);
  buf.write(SENSOR_MAGIC, 0, "ascii");
  buf.writeUInt32LE(message.seq >>> 0, 4);
  buf.writeDoubleLE(message.simTime, 8);
  for (let i = 0; i < SENSOR_VALUE_COUNT; i++) {
    buf.writeDoubleLE(message.values[i], 16 + 8 * i);
  }
  return buf;
}

export function decodeSensor(data: Buffer): SensorMessage {
  if (data.length !== SENSOR_DATAGRAM_SIZE) {
    throw new WireError("bad_length", `${data.length} != ${SENSOR_DATAGRAM_SIZE}`);
  }
  if (data.toString("ascii", 0, 4) !== SENSOR_MAGIC) {
    throw new WireError("bad_magic");
  }
  const values = new Float64Array(SENSOR_VALUE_COUNT);
  for (let i = 0; i < SENSOR_VALUE_COUNT; i++) {
    values[i] = data.readDoubleLE(16 + 8 * i);
  }
  return { seq: data.readUInt32LE(4), simTime: data.readDoubleLE(8), values };
}

export function encodeCameraFrame(frame: CameraFrame): Buffer {
  const expected = frame.width * frame.height * frame.channels;
  if (frame.pixels.length !== expected) {
    throw new WireError("bad_pixels", `${frame.pixels.length} != ${expected}`);
  }
  const payload = Buffer.alloc(17 + frame.pixels.length);
  payload.writeUInt32LE(frame.seq >>> 0, 0);
  payload.writeDoubleLE(frame.simTime, 4);
  payload.writeUInt16LE(frame.width, 12);
  payload.writeUInt16LE(frame.height, 14);
  payload.writeUInt8(frame.channels, 16);
  payload.set(frame.pixels, 17);
  const head = Buffer.alloc(4);
  head.writeUInt32LE(payload.length, 0);
  return Buffer.concat([head, payload]);
}

export function decodeCameraPayload(payload: Buffer): CameraFrame {
  if (payload.length < 17) {
    throw new WireError("bad_length", `payload ${payload.length} shorter than header`);
  }
  const width = payload.readUInt16LE(12);
  const height = payload.readUInt16LE(14);
  const channels = payload.readUInt8(16);
  const pixels = new Uint8Array(payload.subarray(17));
  if (pixels.length !== width * height * channels) {
    throw new WireError(
      "bad_length",
      `${pixels.length} pixel bytes for ${width}x${height}x${channels}`
    );
  }
  return {
    seq: payload.readUInt32LE(0),
    simTime: payload.readDoubleLE(4),
    width,
    height,
    channels,
    pixels,
  };
}
