/** Typed client for the collection service HTTP API. */

import type { Sample } from "./capture.js";
import type { Rect } from "./geometry.js";
import type { TrajectoryParams } from "./reaction.js";

export interface PlaylistEntry {
  video_id: string;
  url: string;
  duration_ms: number;
}

export interface CaptchaClipRef {
  clip_id: string;
  url: string;
}

export interface SessionInfo {
  session_id: string;
  playlist: PlaylistEntry[];
  reaction: TrajectoryParams;
  captcha_clips: Record<string, CaptchaClipRef>;
}

export interface ReactionResult {
  pass: boolean;
}

export interface CaptchaResult {
  pass: boolean;
  retries_left: number;
}

export interface ViewResult {
  accepted: boolean;
  flags: string[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Every decoded response body, for auditing what the server exposes. */
  readonly responseLog: unknown[] = [];

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const decoded = await response.json().catch(() => ({}));
    this.responseLog.push(decoded);
    if (!response.ok) {
      const detail =
        typeof decoded === "object" && decoded !== null
          ? ((decoded as Record<string, unknown>).error ?? (decoded as Record<string, unknown>).detail ?? "")
          : "";
      throw new ApiError(response.status, String(detail));
    }
    return decoded as T;
  }

  createSession(screenW: number, screenH: number, locale = "en"): Promise<SessionInfo> {
    return this.post<SessionInfo>("/api/v1/session", {
      screen_w: screenW,
      screen_h: screenH,
      locale,
    });
  }

  submitReaction(sessionId: string, attempts: Sample[][]): Promise<ReactionResult> {
    return this.post<ReactionResult>(`/api/v1/session/${sessionId}/reaction`, {
      attempts: attempts.map((samples) => ({ samples })),
    });
  }

  submitCaptcha(sessionId: string, checkpoint: "start" | "middle", answer: string): Promise<CaptchaResult> {
    return this.post<CaptchaResult>(`/api/v1/session/${sessionId}/captcha`, { checkpoint, answer });
  }

  submitView(
    sessionId: string,
    videoId: string,
    rating: number,
    samples: Sample[],
    videoRect: Rect,
  ): Promise<ViewResult> {
    return this.post<ViewResult>(`/api/v1/session/${sessionId}/view`, {
      video_id: videoId,
      rating,
      samples,
      video_rect: videoRect,
    });
  }

  videoUrl(videoId: string): string {
    return `${this.baseUrl}/api/v1/video/${videoId}`;
  }
}
