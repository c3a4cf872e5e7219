/**
 * Protocol driver: create session, pass the reaction test and the start
 * captcha, then walk the playlist uploading one view per video, answering
 * the middle captcha when the server demands it.
 *
 * Upload failures retry with exponential backoff; the captured samples are
 * retained until the server accepts them.  Server-side slot tracking makes
 * retries at-most-once.
 */

import { ApiClient, ApiError, type PlaylistEntry, type SessionInfo, type ViewResult } from "./api.js";
import type { Sample } from "./capture.js";
import type { Rect } from "./geometry.js";
import { REACTION_ATTEMPTS, RectTrajectory } from "./reaction.js";

export interface ViewerHooks {
  /** Produce the cursor samples for one reaction attempt. */
  reactionAttempt(trajectory: RectTrajectory, attemptIndex: number): Promise<Sample[]> | Sample[];
  /** Answer an audio captcha given its clip reference. */
  captchaAnswer(checkpoint: "start" | "middle", clipId: string): Promise<string> | string;
  /** Play one video and return the captured samples plus the display rect. */
  watchVideo(entry: PlaylistEntry): Promise<{ samples: Sample[]; videoRect: Rect }> | { samples: Sample[]; videoRect: Rect };
  /** Star rating for the video just watched (1..5). */
  rating(entry: PlaylistEntry): Promise<number> | number;
}

export interface SessionOutcome {
  session: SessionInfo;
  viewResults: ViewResult[];
  reactionPassed: boolean;
}

export interface DriverOptions {
  maxUploadRetries?: number;
  backoffBaseMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

function isMiddleCaptchaDemand(error: unknown): boolean {
  return error instanceof ApiError && error.status === 409 && /middle captcha/i.test(error.detail);
}

export class SessionDriver {
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly maxUploadRetries: number;
  private readonly backoffBaseMs: number;

  constructor(
    private readonly client: ApiClient,
    private readonly hooks: ViewerHooks,
    options: DriverOptions = {},
  ) {
    this.sleep = options.sleep ?? defaultSleep;
    this.maxUploadRetries = options.maxUploadRetries ?? 3;
    this.backoffBaseMs = options.backoffBaseMs ?? 500;
  }

  async run(screenW: number, screenH: number, locale = "en"): Promise<SessionOutcome> {
    const session = await this.client.createSession(screenW, screenH, locale);
    const trajectory = new RectTrajectory(session.reaction);

    const attempts: Sample[][] = [];
    for (let i = 0; i < REACTION_ATTEMPTS; i++) {
      attempts.push(await this.hooks.reactionAttempt(trajectory, i));
    }
    const reaction = await this.client.submitReaction(session.session_id, attempts);
    if (!reaction.pass) {
      return { session, viewResults: [], reactionPassed: false };
    }

    await this.answerCaptcha(session, "start");

    const viewResults: ViewResult[] = [];
    for (const entry of session.playlist) {
      const { samples, videoRect } = await this.hooks.watchVideo(entry);
      const rating = await this.hooks.rating(entry);
      viewResults.push(await this.uploadWithRetry(session, entry, rating, samples, videoRect));
    }
    return { session, viewResults, reactionPassed: true };
  }

  private async answerCaptcha(session: SessionInfo, checkpoint: "start" | "middle"): Promise<void> {
    const clip = session.captcha_clips[checkpoint];
    if (!clip) {
      throw new Error(`no captcha clip for checkpoint ${checkpoint}`);
    }
    // keep answering until the server accepts or closes the session
    for (;;) {
      const answer = await this.hooks.captchaAnswer(checkpoint, clip.clip_id);
      const result = await this.client.submitCaptcha(session.session_id, checkpoint, answer);
      if (result.pass) {
        return;
      }
      if (result.retries_left <= 0) {
        throw new Error(`captcha ${checkpoint} failed; session rejected`);
      }
    }
  }

  private async uploadWithRetry(
    session: SessionInfo,
    entry: PlaylistEntry,
    rating: number,
    samples: Sample[],
    videoRect: Rect,
  ): Promise<ViewResult> {
    let networkFailures = 0;
    for (;;) {
      try {
        return await this.client.submitView(session.session_id, entry.video_id, rating, samples, videoRect);
      } catch (error) {
        if (isMiddleCaptchaDemand(error)) {
          await this.answerCaptcha(session, "middle");
          continue; // buffer retained; retry the same slot
        }
        if (error instanceof ApiError) {
          throw error; // protocol/validation errors are not retryable
        }
        networkFailures += 1;
        if (networkFailures > this.maxUploadRetries) {
          throw error;
        }
        await this.sleep(this.backoffBaseMs * 2 ** (networkFailures - 1));
      }
    }
  }
}
