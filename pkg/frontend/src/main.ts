/**
 * Browser entry point: runs the full viewing protocol against the
 * collection service with live cursor capture.
 *
 * Flow per participant: fullscreen gate -> reaction test -> audio captcha
 * -> 23 videos (blurred playback with a clear aperture around the cursor,
 * star rating after each) with a second captcha at the midpoint.
 */

import { ApiClient, type PlaylistEntry } from "./api.js";
import { blurConfigForScreen, renderBlurOverlay } from "./blur.js";
import { CaptureBuffer, type Sample } from "./capture.js";
import { aspectFitRect } from "./geometry.js";
import { RectTrajectory, runReactionAttempt } from "./reaction.js";
import { SessionDriver } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function showScreen(id: string): void {
  for (const section of document.querySelectorAll<HTMLElement>("[data-screen]")) {
    section.hidden = section.id !== id;
  }
}

async function ensureFullscreen(stage: HTMLElement): Promise<void> {
  if (document.fullscreenElement) {
    return;
  }
  showScreen("screen-fullscreen");
  await new Promise<void>((resolve) => {
    el<HTMLButtonElement>("enter-fullscreen").onclick = async () => {
      await stage.requestFullscreen();
      resolve();
    };
  });
}

function promptRating(): Promise<number> {
  showScreen("screen-rating");
  const stars = el<HTMLDivElement>("stars");
  return new Promise((resolve) => {
    stars.onclick = (event) => {
      const value = Number((event.target as HTMLElement).dataset.value);
      if (value >= 1 && value <= 5) {
        stars.onclick = null;
        resolve(value);
      }
    };
  });
}

function promptCaptcha(clipUrl: string): Promise<string> {
  showScreen("screen-captcha");
  const audio = el<HTMLAudioElement>("captcha-audio");
  audio.src = clipUrl;
  void audio.play();
  const form = el<HTMLFormElement>("captcha-form");
  const input = el<HTMLInputElement>("captcha-answer");
  return new Promise((resolve) => {
    form.onsubmit = (event) => {
      event.preventDefault();
      form.onsubmit = null;
      resolve(input.value);
      input.value = "";
    };
  });
}

async function watchVideo(client: ApiClient, entry: PlaylistEntry) {
  showScreen("screen-viewing");
  const stage = el<HTMLDivElement>("stage");
  const video = el<HTMLVideoElement>("player");
  const canvas = el<HTMLCanvasElement>("overlay");
  const screenW = stage.clientWidth;
  const screenH = stage.clientHeight;
  canvas.width = screenW;
  canvas.height = screenH;
  const ctx = canvas.getContext("2d")!;
  const blur = blurConfigForScreen(screenW);

  video.muted = false; // sound stays on; the captchas verify it is audible
  video.src = client.videoUrl(entry.video_id);
  await video.play();
  const rect = aspectFitRect(screenW, screenH, video.videoWidth || 16, video.videoHeight || 9);

  const buffer = new CaptureBuffer(rect);
  buffer.start(performance.now());
  const cursor = { x: screenW / 2, y: screenH / 2 };
  const onMove = (event: MouseEvent) => {
    cursor.x = event.clientX;
    cursor.y = event.clientY;
    buffer.record(performance.now(), event.clientX, event.clientY);
  };
  stage.addEventListener("mousemove", onMove);

  let playing = true;
  const paint = () => {
    if (!playing) {
      return;
    }
    if (!document.fullscreenElement) {
      video.pause(); // capture suspends until fullscreen returns
      showScreen("screen-fullscreen");
      return;
    }
    renderBlurOverlay(ctx, video, rect, cursor, blur);
    requestAnimationFrame(paint);
  };
  requestAnimationFrame(paint);

  await new Promise<void>((resolve) => {
    video.onended = () => resolve();
  });
  playing = false;
  stage.removeEventListener("mousemove", onMove);
  return { samples: buffer.flush(), videoRect: rect };
}

export async function start(baseUrl = ""): Promise<void> {
  const stage = el<HTMLDivElement>("stage");
  await ensureFullscreen(stage);
  const screenW = window.screen.width;
  const screenH = window.screen.height;

  const client = new ApiClient(baseUrl);
  const driver = new SessionDriver(client, {
    reactionAttempt: async (trajectory: RectTrajectory, attempt: number) => {
      showScreen("screen-reaction");
      el<HTMLSpanElement>("attempt-no").textContent = String(attempt + 1);
      const box = el<HTMLDivElement>("reaction-rect");
      box.style.width = `${trajectory.params.rect_w}px`;
      box.style.height = `${trajectory.params.rect_h}px`;
      const cursor: [number, number] = [0, 0];
      const onMove = (event: MouseEvent) => {
        cursor[0] = event.clientX;
        cursor[1] = event.clientY;
      };
      window.addEventListener("mousemove", onMove);
      const samples: Sample[] = await runReactionAttempt(
        trajectory,
        (x, y) => {
          box.style.transform = `translate(${x}px, ${y}px)`;
        },
        () => [cursor[0], cursor[1]],
      );
      window.removeEventListener("mousemove", onMove);
      return samples;
    },
    captchaAnswer: (checkpoint, clipId) => promptCaptcha(`${baseUrl}/api/v1/captcha/${clipId}`),
    watchVideo: (entry) => watchVideo(client, entry),
    rating: () => promptRating(),
  });

  try {
    const outcome = await driver.run(screenW, screenH);
    showScreen(outcome.reactionPassed ? "screen-done" : "screen-rejected");
  } catch (error) {
    el<HTMLParagraphElement>("reject-reason").textContent = String(error);
    showScreen("screen-rejected");
  }
}

if (typeof document !== "undefined" && document.getElementById("stage")) {
  void start();
}
