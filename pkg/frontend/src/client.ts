/**
 * Gym-style client for the racing simulator server.
 *
 * Talks to the three server channels: JSON-lines control (TCP), action
 * datagrams (UDP out), sensor datagrams (UDP in), and optionally the
 * camera frame stream (TCP in). Lockstep pacing is assumed: step()
 * sends the action datagram, asks the server to advance exactly one
 * step barriered on that datagram's sequence number, and then waits for
 * the sensor (and camera) data of the new step.
 */

import * as dgram from "node:dgram";
import * as net from "node:net";

import {
  ActionMessage,
  CameraFrame,
  Gear,
  SENSOR_DATAGRAM_SIZE,
  SensorMessage,
  decodeCameraPayload,
  decodeSensor,
  encodeAction,
} from "./wire.js";

export type PerceptionMode = "vision_only" | "multimodal";

export interface ConnectOptions {
  host?: string;
  controlPort: number;
  actionPort: number;
  cameraPort?: number;
  mode?: PerceptionMode;
  image?: { width: number; height: number; channels?: number };
  timeoutMs?: number;
}

export interface BoxSpace {
  shape: number[];
  low: number[];
  high: number[];
}

export interface ObservationSpace {
  image?: { shape: [number, number, number]; dtype: "uint8" };
  multimodal?: { shape: [number]; dtype: "float64" };
}

export interface Observation {
  simTime: number;
  multimodal?: Float64Array;
  image?: CameraFrame;
}

export interface StepResult {
  observation: Observation;
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export class ControlError extends Error {
  constructor(public readonly reply: Record<string, unknown>) {
    super(`control error: ${reply.reason ?? "unknown"} ${reply.detail ?? ""}`.trim());
    this.name = "ControlError";
  }
}

export class EpisodeFinishedError extends Error {
  constructor() {
    super("episode already finished; call reset()");
    this.name = "EpisodeFinishedError";
  }
}

export class StaleSensorError extends Error {
  constructor(channel: string, timeoutMs: number) {
    super(`no fresh ${channel} data within ${timeoutMs} ms`);
    this.name = "StaleSensorError";
  }
}

interface Waiter<T> {
  predicate: (message: T, arrival: number) => boolean;
  resolve: (message: T) => void;
  reject: (error: Error) => void;
  timer: NodeJS.Timeout;
}

/** Latest-value channel with predicate-based waiting. */
class LatestChannel<T> {
  latest: T | null = null;
  arrivals = 0;
  private latestArrival = 0;
  private waiters: Waiter<T>[] = [];

  constructor(private readonly label: string) {}

  push(message: T): void {
    this.arrivals += 1;
    this.latest = message;
    this.latestArrival = this.arrivals;
    this.waiters = this.waiters.filter((waiter) => {
      if (!waiter.predicate(message, this.arrivals)) {
        return true;
      }
      clearTimeout(waiter.timer);
      waiter.resolve(message);
      return false;
    });
  }

  waitFor(
    predicate: (message: T, arrival: number) => boolean,
    timeoutMs: number
  ): Promise<T> {
    if (this.latest !== null && predicate(this.latest, this.latestArrival)) {
      return Promise.resolve(this.latest);
    }
    return new Promise<T>((resolve, reject) => {
      const waiter: Waiter<T> = {
        predicate,
        resolve,
        reject,
        timer: setTimeout(() => {
          this.waiters = this.waiters.filter((w) => w !== waiter);
          reject(new StaleSensorError(this.label, timeoutMs));
        }, timeoutMs),
      };
      this.waiters.push(waiter);
    });
  }

  dispose(): void {
    for (const waiter of this.waiters) {
      clearTimeout(waiter.timer);
      waiter.reject(new Error("channel closed"));
    }
    this.waiters = [];
  }
}

/** JSON-lines request/reply over a TCP socket (replies arrive in order). */
class ControlChannel {
  private buffer = "";
  private pending: Array<{
    resolve: (doc: Record<string, unknown>) => void;
    reject: (error: Error) => void;
  }> = [];

  constructor(private readonly socket: net.Socket) {
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => this.onData(chunk));
    socket.on("error", (error) => this.failAll(error));
    socket.on("close", () => this.failAll(new Error("control connection closed")));
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let index;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 1);
      const waiter = this.pending.shift();
      if (waiter === undefined) {
        continue; // unsolicited line; protocol violation but harmless
      }
      try {
        waiter.resolve(JSON.parse(line));
      } catch (error) {
        waiter.reject(error as Error);
      }
    }
  }

  private failAll(error: Error): void {
    const pending = this.pending;
    this.pending = [];
    for (const waiter of pending) {
      waiter.reject(error);
    }
  }

  request(doc: Record<string, unknown>): Promise<Record<string, unknown>> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket.write(JSON.stringify(doc) + "\n", (error) => {
        if (error) {
          reject(error);
        }
      });
    });
  }

  close(): void {
    this.failAll(new Error("control channel closed"));
    this.socket.destroy();
  }
}

function connectSocket(host: string, port: number, timeoutMs: number): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host, port });
    const timer = setTimeout(() => {
      socket.destroy();
      reject(new Error(`connect timeout to ${host}:${port}`));
    }, timeoutMs);
    socket.once("connect", () => {
      clearTimeout(timer);
      resolve(socket);
    });
    socket.once("error", (error) => {
      clearTimeout(timer);
      reject(error);
    });
  });
}

export class RacingEnv {
  readonly actionSpace: BoxSpace = { shape: [2], low: [-1, -1], high: [1, 1] };
  readonly observationSpace: ObservationSpace;
  readonly mode: PerceptionMode;

  private actionSeq = 0;
  private readonly sensors = new LatestChannel<SensorMessage>("sensor");
  private readonly frames = new LatestChannel<CameraFrame>("camera");
  private cameraBuffer: Buffer = Buffer.alloc(0);
  private done = true;

  private constructor(
    private readonly control: ControlChannel,
    private readonly actionSocket: dgram.Socket,
    private readonly actionTarget: { host: string; port: number },
    private readonly sensorSocket: dgram.Socket | null,
    private readonly cameraSocket: net.Socket | null,
    mode: PerceptionMode,
    imageShape: [number, number, number] | null,
    private readonly timeoutMs: number
  ) {
    this.mode = mode;
    this.observationSpace = {};
    if (mode === "multimodal") {
      this.observationSpace.multimodal = { shape: [30], dtype: "float64" };
    }
    if (imageShape !== null) {
      this.observationSpace.image = { shape: imageShape, dtype: "uint8" };
    }
  }

  /** Connect to a running server and perform the mode handshake. */
  static async connect(options: ConnectOptions): Promise<RacingEnv> {
    const host = options.host ?? "127.0.0.1";
    const timeoutMs = options.timeoutMs ?? 10_000;
    const mode = options.mode ?? "multimodal";
    const wantCamera = mode === "vision_only" || options.cameraPort !== undefined;
    if (mode === "vision_only" && options.cameraPort === undefined) {
      throw new Error("vision_only mode requires cameraPort");
    }

    const controlSocket = await connectSocket(host, options.controlPort, timeoutMs);
    const control = new ControlChannel(controlSocket);
    const visionReply = await control.request({
      cmd: "set_mode",
      vision_only: mode === "vision_only",
    });
    if (visionReply.status !== "ok") {
      throw new ControlError(visionReply);
    }

    const actionSocket = dgram.createSocket("udp4");

    let sensorSocket: dgram.Socket | null = null;
    sensorSocket = dgram.createSocket("udp4");
    await new Promise<void>((resolve, reject) => {
      sensorSocket!.once("error", reject);
      sensorSocket!.bind(0, host, resolve);
    });
    const sensorPort = (sensorSocket.address() as net.AddressInfo).port;
    const subscribeReply = await control.request({
      cmd: "subscribe_sensors",
      port: sensorPort,
    });
    if (subscribeReply.status !== "ok") {
      throw new ControlError(subscribeReply);
    }

    let cameraSocket: net.Socket | null = null;
    let imageShape: [number, number, number] | null = null;
    if (wantCamera) {
      cameraSocket = await connectSocket(host, options.cameraPort!, timeoutMs);
      const image = options.image ?? { width: 192, height: 192, channels: 3 };
      imageShape = [image.height, image.width, image.channels ?? 3];
    }

    const env = new RacingEnv(
      control,
      actionSocket,
      { host, port: options.actionPort },
      sensorSocket,
      cameraSocket,
      mode,
      imageShape,
      timeoutMs
    );
    env.attachSensorSocket();
    env.attachCameraSocket();
    return env;
  }

  private attachSensorSocket(): void {
    this.sensorSocket?.on("message", (data: Buffer) => {
      if (data.length !== SENSOR_DATAGRAM_SIZE) {
        return; // malformed datagrams are dropped
      }
      try {
        this.sensors.push(decodeSensor(data));
      } catch {
        /* dropped */
      }
    });
  }

  private attachCameraSocket(): void {
    this.cameraSocket?.on("data", (chunk: Buffer) => {
      this.cameraBuffer = Buffer.concat([this.cameraBuffer, chunk]);
      while (this.cameraBuffer.length >= 4) {
        const length = this.cameraBuffer.readUInt32LE(0);
        if (this.cameraBuffer.length < 4 + length) {
          break;
        }
        const payload = this.cameraBuffer.subarray(4, 4 + length);
        this.cameraBuffer = this.cameraBuffer.subarray(4 + length);
        try {
          this.frames.push(decodeCameraPayload(Buffer.from(payload)));
        } catch {
          /* dropped */
        }
      }
    });
  }

  private async collectObservation(minSimTime: number, marker: number): Promise<Observation> {
    const observation: Observation = { simTime: minSimTime };
    const fresh = (message: { simTime: number }, arrival: number) =>
      arrival > marker && message.simTime >= minSimTime - 1e-9;
    const sensor = await this.sensors.waitFor(fresh, this.timeoutMs);
    observation.simTime = sensor.simTime;
    if (this.mode === "multimodal") {
      observation.multimodal = sensor.values;
    }
    if (this.cameraSocket !== null) {
      observation.image = await this.frames.waitFor(fresh, this.timeoutMs);
    }
    return observation;
  }

  /** Reset the episode (optionally overriding episode config fields). */
  async reset(config?: Record<string, unknown>): Promise<Observation> {
    const overrides: Record<string, unknown> = { ...(config ?? {}) };
    if (this.observationSpace.image !== undefined) {
      const [height, width, channels] = this.observationSpace.image.shape;
      overrides.camera = {
        enabled: true,
        width,
        height,
        channels,
        ...((overrides.camera as Record<string, unknown>) ?? {}),
      };
    }
    const sensorMarker = this.sensors.arrivals;
    const reply = await this.control.request({ cmd: "reset", config: overrides });
    if (reply.status !== "ok") {
      throw new ControlError(reply);
    }
    this.done = false;
    return this.collectObservation(0.0, sensorMarker);
  }

  /** Send one action and advance the simulation one step (lockstep). */
  async step(action: [number, number]): Promise<StepResult> {
    if (this.done) {
      throw new EpisodeFinishedError();
    }
    const [acceleration, steering] = action;
    this.actionSeq += 1;
    const message: ActionMessage = {
      seq: this.actionSeq,
      steering,
      acceleration,
      gear: Gear.Drive,
    };
    const datagram = encodeAction(message);
    const sensorMarker = this.sensors.arrivals;
    await new Promise<void>((resolve, reject) => {
      this.actionSocket.send(
        datagram,
        this.actionTarget.port,
        this.actionTarget.host,
        (error) => (error ? reject(error) : resolve())
      );
    });
    const reply = await this.control.request({
      cmd: "step",
      n: 1,
      await_seq: this.actionSeq,
    });
    if (reply.status !== "ok") {
      if (reply.reason === "episode_finished") {
        this.done = true;
        throw new EpisodeFinishedError();
      }
      throw new ControlError(reply);
    }
    const simTime = reply.sim_time as number;
    const observation = await this.collectObservation(simTime, sensorMarker);
    this.done = reply.done as boolean;
    return {
      observation,
      reward: reply.reward as number,
      done: this.done,
      info: (reply.info as Record<string, unknown>) ?? {},
    };
  }

  async setMode(visionOnly: boolean): Promise<boolean> {
    const reply = await this.control.request({ cmd: "set_mode", vision_only: visionOnly });
    if (reply.status !== "ok") {
      throw new ControlError(reply);
    }
    return reply.vision_only as boolean;
  }

  async getState(): Promise<Record<string, unknown>> {
    const reply = await this.control.request({ cmd: "get_state" });
    if (reply.status !== "ok") {
      throw new ControlError(reply);
    }
    return reply;
  }

  async getLog(): Promise<Record<string, unknown>> {
    const reply = await this.control.request({ cmd: "get_log" });
    if (reply.status !== "ok") {
      throw new ControlError(reply);
    }
    return reply.log as Record<string, unknown>;
  }

  async shutdownServer(): Promise<void> {
    await this.control.request({ cmd: "shutdown" });
  }

  close(): void {
    this.sensors.dispose();
    this.frames.dispose();
    this.control.close();
    for (const socket of [this.actionSocket, this.sensorSocket]) {
      try {
        socket?.close();
      } catch {
        /* already closed */
      }
    }
    this.cameraSocket?.destroy();
  }
}
