/**
 * Integration tests against the real Python server: spawn
 * `python3 -m trackday serve` in lockstep pacing, connect, and drive.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { EpisodeFinishedError, RacingEnv } from "../src/client.js";

const PYTHON = process.env.TRACKDAY_PYTHON ?? "python3";

interface ServerHandle {
  proc: ChildProcess;
  actionPort: number;
  controlPort: number;
  cameraPort: number;
}

function spawnServer(extraArgs: string[] = []): Promise<ServerHandle> {
  return new Promise((resolve, reject) => {
    const proc = spawn(
      PYTHON,
      ["-m", "trackday", "serve", "--track", "oval", "--pacing", "lockstep", ...extraArgs],
      { stdio: ["ignore", "pipe", "pipe"] }
    );
    let buffer = "";
    let stderr = "";
    const timer = setTimeout(() => {
      proc.kill();
      reject(new Error(`server did not report ports; stderr: ${stderr}`));
    }, 30_000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString("utf-8");
      const line = buffer.split("\n")[0];
      if (line && line.includes("serving")) {
        clearTimeout(timer);
        const doc = JSON.parse(line);
        resolve({
          proc,
          actionPort: doc.action_port,
          controlPort: doc.control_port,
          cameraPort: doc.camera_port,
        });
      }
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      stderr += chunk.toString("utf-8");
    });
    proc.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}); stderr: ${stderr}`));
    });
  });
}

function runCli(args: string[]): Promise<string> {
  return new Promise((resolve, reject) => {
    const proc = spawn(PYTHON, ["-m", "trackday", ...args], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    let out = "";
    let err = "";
    proc.stdout!.on("data", (c: Buffer) => (out += c.toString()));
    proc.stderr!.on("data", (c: Buffer) => (err += c.toString()));
    proc.once("exit", (code) =>
      code === 0 ? resolve(out) : reject(new Error(`cli exited ${code}: ${err}`))
    );
  });
}

describe("remote environment", () => {
  let server: ServerHandle;

  beforeAll(async () => {
    server = await spawnServer();
  }, 60_000);

  afterAll(() => {
    server?.proc.kill();
  });

  it("connects with Table-1-shaped spaces (multimodal)", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
      mode: "multimodal",
    });
    try {
      expect(env.actionSpace.shape).toEqual([2]);
      expect(env.actionSpace.low).toEqual([-1, -1]);
      expect(env.actionSpace.high).toEqual([1, 1]);
      expect(env.observationSpace.multimodal?.shape).toEqual([30]);
      expect(env.observationSpace.image).toBeUndefined();
    } finally {
      env.close();
    }
  });

  it("rejects connection to a wrong port with a timeout error", async () => {
    await expect(
      RacingEnv.connect({
        controlPort: 1, // nothing listens there
        actionPort: server.actionPort,
        timeoutMs: 1500,
      })
    ).rejects.toThrow();
  }, 15_000);

  it("resets to a standing start and steps with near-zero velocity", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
    });
    try {
      const obs = await env.reset();
      expect(obs.simTime).toBe(0);
      expect(obs.multimodal).toHaveLength(30);
      expect(obs.multimodal![3]).toBe(0); // velocity east
      expect(obs.multimodal![4]).toBe(0); // velocity north

      for (let i = 0; i < 5; i++) {
        const result = await env.step([0, 0]);
        expect(result.done).toBe(false);
        expect(Math.abs(result.observation.multimodal![3])).toBeLessThan(1e-9);
        expect(Math.abs(result.observation.multimodal![4])).toBeLessThan(1e-9);
      }
    } finally {
      env.close();
    }
  }, 30_000);

  it("decodes sensor values bit-identically to server-side values", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
    });
    try {
      await env.reset();
      for (let i = 0; i < 10; i++) {
        const result = await env.step([0.7, 0.05 * Math.sin(i)]);
        const state = await env.getState();
        const serverObs = state.obs as number[];
        for (let slot = 0; slot < 30; slot++) {
          // strict equality: both sides must hold the same float64
          expect(result.observation.multimodal![slot]).toBe(serverObs[slot]);
        }
      }
    } finally {
      env.close();
    }
  }, 30_000);

  it("raises after the episode is finished", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
    });
    try {
      await env.reset({ max_wall_steps: 2 });
      await env.step([0, 0]);
      const result = await env.step([0, 0]);
      expect(result.done).toBe(true);
      expect((result.info as { termination_reason?: string }).termination_reason).toBe(
        "step_limit"
      );
      await expect(env.step([0, 0])).rejects.toThrow(EpisodeFinishedError);
    } finally {
      env.close();
    }
  }, 30_000);

  it("switches perception modes via set_mode", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
    });
    try {
      expect(await env.setMode(true)).toBe(true);
      expect((await env.getState()).vision_only).toBe(true);
      expect(await env.setMode(false)).toBe(false);
      expect((await env.getState()).vision_only).toBe(false);
    } finally {
      env.close();
    }
  });

  it("streams camera frames in vision-only mode", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
      cameraPort: server.cameraPort,
      mode: "vision_only",
      image: { width: 64, height: 48 },
    });
    try {
      expect(env.observationSpace.image?.shape).toEqual([48, 64, 3]);
      expect(env.observationSpace.multimodal).toBeUndefined();
      const obs = await env.reset();
      expect(obs.multimodal).toBeUndefined();
      expect(obs.image).toBeDefined();
      expect(obs.image!.width).toBe(64);
      expect(obs.image!.height).toBe(48);
      expect(obs.image!.pixels.length).toBe(64 * 48 * 3);
      // drivable area must be visible from the standing start
      expect(obs.image!.pixels.some((v) => v === 255)).toBe(true);

      const result = await env.step([0.5, 0]);
      expect(result.observation.image).toBeDefined();
      expect(result.observation.image!.simTime).toBeGreaterThan(0);
    } finally {
      env.close();
    }
  }, 30_000);

  it("raises a stale-sensor error when sensor data stops flowing", async () => {
    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
      timeoutMs: 800,
    });
    try {
      await env.reset();
      // sever the sensor feed behind the environment's back
      (env as unknown as { sensorSocket: { close: () => void } }).sensorSocket.close();
      await expect(env.step([0, 0])).rejects.toThrow(/no fresh sensor data/);
    } finally {
      env.close();
    }
  }, 15_000);
});

describe("full remote episode", () => {
  let server: ServerHandle;
  let workdir: string;

  beforeAll(async () => {
    server = await spawnServer();
    workdir = mkdtempSync(join(tmpdir(), "trackday-client-"));
  }, 60_000);

  afterAll(() => {
    server?.proc.kill();
    rmSync(workdir, { recursive: true, force: true });
  });

  it("drives an MPC action stream to laps_complete", async () => {
    // collect the expert action stream with the reference CLI
    await runCli([
      "run", "--agent", "mpc", "--track", "oval", "--laps", "3", "--out", workdir,
    ]);
    const log = JSON.parse(readFileSync(join(workdir, "log.json"), "utf-8"));
    const accel: number[] = log.samples.accel_cmd;
    const steer: number[] = log.samples.steer_cmd;
    expect(log.meta.termination_reason).toBe("laps_complete");

    const env = await RacingEnv.connect({
      controlPort: server.controlPort,
      actionPort: server.actionPort,
    });
    try {
      await env.reset({ laps_required: 3 });
      let done = false;
      let info: Record<string, unknown> = {};
      // sample 0 is the reset row; actions replay from sample 1 on
      for (let i = 1; i < accel.length && !done; i++) {
        const result = await env.step([accel[i], steer[i]]);
        done = result.done;
        info = result.info;
      }
      expect(done).toBe(true);
      expect(info.termination_reason).toBe("laps_complete");
      expect(info.lap).toBe(3);

      // the remote log must equal the reference log bit-for-bit
      const remoteLog = (await env.getLog()) as {
        samples: Record<string, number[]>;
      };
      expect(remoteLog.samples.x).toEqual(log.samples.x);
      expect(remoteLog.samples.progress).toEqual(log.samples.progress);
    } finally {
      env.close();
    }
  }, 180_000);
});
