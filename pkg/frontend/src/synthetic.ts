/**
 * Scripted viewer for automated end-to-end runs: a deterministic cursor
 * path per video, a cursor glued to the reaction rectangle, and captcha
 * answers supplied by the harness.
 */

import type { PlaylistEntry, SessionInfo, ViewResult } from "./api.js";
import { ApiClient } from "./api.js";
import type { Sample } from "./capture.js";
import { aspectFitRect, videoToScreen, type Rect } from "./geometry.js";
import { followCenterSamples, RectTrajectory } from "./reaction.js";
import { SessionDriver } from "./session.js";

export interface SyntheticOptions {
  screenW: number;
  screenH: number;
  videoW: number;
  videoH: number;
  sampleStepMs?: number;
  rating?: number;
  captchaAnswers: Record<string, string>; // clip_id -> answer
}

/** Deterministic smooth path in video coordinates (circle per video id). */
export function scriptedVideoPos(videoId: string, tMs: number, videoW: number, videoH: number): [number, number] {
  let codeSum = 0;
  let weighted = 0;
  for (let i = 0; i < videoId.length; i++) {
    codeSum += videoId.charCodeAt(i);
    weighted += videoId.charCodeAt(i) * 7;
  }
  const phase = ((codeSum % 17) / 17) * 2 * Math.PI;
  const period = 2500 + (weighted % 1000);
  const angle = phase + (2 * Math.PI * tMs) / period;
  const r = 0.3 * Math.min(videoW, videoH);
  return [videoW / 2 + r * Math.cos(angle), videoH / 2 + r * Math.sin(angle)];
}

export function scriptedScreenSamples(
  videoId: string,
  rect: Rect,
  videoW: number,
  videoH: number,
  durationMs: number,
  stepMs = 20,
): Sample[] {
  const samples: Sample[] = [];
  for (let t = 0; t <= durationMs; t += stepMs) {
    const [vx, vy] = scriptedVideoPos(videoId, t, videoW, videoH);
    const [sx, sy] = videoToScreen(rect, videoW, videoH, vx, vy);
    samples.push([t, sx, sy]);
  }
  return samples;
}

export interface SyntheticOutcome {
  session: SessionInfo;
  viewResults: ViewResult[];
  reactionPassed: boolean;
  responseLog: unknown[];
}

export async function runScriptedSession(baseUrl: string, options: SyntheticOptions): Promise<SyntheticOutcome> {
  const client = new ApiClient(baseUrl);
  const rect = aspectFitRect(options.screenW, options.screenH, options.videoW, options.videoH);
  const driver = new SessionDriver(client, {
    reactionAttempt: (trajectory: RectTrajectory) => followCenterSamples(trajectory),
    captchaAnswer: (_checkpoint, clipId) => {
      const answer = options.captchaAnswers[clipId];
      if (answer === undefined) {
        throw new Error(`no scripted answer for clip ${clipId}`);
      }
      return answer;
    },
    watchVideo: (entry: PlaylistEntry) => ({
      samples: scriptedScreenSamples(
        entry.video_id,
        rect,
        options.videoW,
        options.videoH,
        entry.duration_ms,
        options.sampleStepMs ?? 20,
      ),
      videoRect: rect,
    }),
    rating: () => options.rating ?? 4,
  });
  const outcome = await driver.run(options.screenW, options.screenH);
  return { ...outcome, responseLog: client.responseLog };
}
