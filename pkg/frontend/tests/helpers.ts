/** Harness utilities: corpus files on disk, the service as a child
 * process, and the toolkit CLI. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import type { Sample } from "../src/capture.js";
import type { Rect } from "../src/geometry.js";

export const VIDEO_W = 192;
export const VIDEO_H = 108;
export const FPS = 10;
export const DURATION_MS = 3000;
export const SCREEN_W = 1920;
export const SCREEN_H = 1080;

export const CONTENT_IDS = Array.from({ length: 22 }, (_, i) => `c${String(i + 1).padStart(2, "0")}`);
export const VALIDATION_IDS = ["v01", "v02", "v03"];

export const CAPTCHA_ANSWERS: Record<string, string> = {
  clip_seven: "7",
  clip_four: "4",
  clip_nine: "9",
};

const PYTHON = process.env.SALBENCH_PYTHON ?? "python3";

export function writeMetaCsv(dir: string): string {
  const lines = ["video_id,width,height,fps,duration_ms,has_audio,subset"];
  for (const id of [...CONTENT_IDS, ...VALIDATION_IDS]) {
    lines.push(`${id},${VIDEO_W},${VIDEO_H},${FPS},${DURATION_MS},1,train`);
  }
  const path = join(dir, "meta.csv");
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

export function writeCaptchaConfig(dir: string): string {
  const config = {
    clips: Object.entries(CAPTCHA_ANSWERS).map(([clip_id, answer]) => ({ clip_id, locale: "en", answer })),
    synonyms: { en: { seven: "7", four: "4", nine: "9" } },
  };
  const path = join(dir, "captchas.json");
  writeFileSync(path, JSON.stringify(config, null, 2));
  return path;
}

export function writeValidationIds(dir: string): string {
  const path = join(dir, "validation_ids.txt");
  writeFileSync(path, VALIDATION_IDS.join("\n") + "\n");
  return path;
}

/** Track file in the toolkit's on-disk format (screen space). */
export function writeTrackFile(
  path: string,
  viewerId: string,
  videoId: string,
  rect: Rect,
  samples: Sample[],
): void {
  const lines = [
    `${viewerId},${videoId},screen,${SCREEN_W},${SCREEN_H},${rect.x},${rect.y},${rect.w},${rect.h}`,
  ];
  for (const [t, x, y] of samples) {
    lines.push(`${t},${x},${y}`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function runCli(args: string[], timeoutMs = 120_000): string {
  const result = spawnSync(PYTHON, ["-m", "salbench.cli", ...args], {
    encoding: "utf-8",
    timeout: timeoutMs,
  });
  if (result.status !== 0) {
    throw new Error(`CLI ${args.join(" ")} failed:\n${result.stdout}\n${result.stderr}`);
  }
  return result.stdout;
}

export interface RunningService {
  baseUrl: string;
  stop(): Promise<void>;
}

export async function startService(workDir: string, storeDir: string, seed = 7): Promise<RunningService> {
  mkdirSync(storeDir, { recursive: true });
  const port = 18000 + (process.pid % 2000);
  const child: ChildProcess = spawn(
    PYTHON,
    [
      "-m",
      "salbench.cli",
      "--seed",
      String(seed),
      "serve",
      "--meta",
      join(workDir, "meta.csv"),
      "--store",
      storeDir,
      "--port",
      String(port),
      "--captchas",
      join(workDir, "captchas.json"),
      "--validation-ids",
      join(workDir, "validation_ids.txt"),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early (${child.exitCode}): ${stderr}`);
    }
    try {
      await fetch(`${baseUrl}/api/v1/video/__ping__`);
      break; // any HTTP response means the server is up
    } catch {
      if (Date.now() > deadline) {
        child.kill();
        throw new Error(`service did not become ready: ${stderr}`);
      }
      await new Promise((r) => setTimeout(r, 250));
    }
  }

  return {
    baseUrl,
    stop: () =>
      new Promise<void>((resolve) => {
        if (child.exitCode !== null || child.signalCode !== null) {
          resolve();
          return;
        }
        child.once("exit", () => resolve());
        child.kill("SIGTERM");
        setTimeout(() => child.kill("SIGKILL"), 10_000).unref();
      }),
  };
}
