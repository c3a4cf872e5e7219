/**
 * Per-view cursor capture: playback-relative timestamps, nondecreasing,
 * flushed exactly once when the view ends.
 */

import type { Rect } from "./geometry.js";

export type Sample = [tMs: number, x: number, y: number];

export class CaptureBuffer {
  readonly videoRect: Rect;
  private samples: Sample[] = [];
  private playbackStart: number | null = null;
  private flushed = false;

  constructor(videoRect: Rect) {
    this.videoRect = { ...videoRect };
  }

  /** Playback start defines t = 0 for every captured event. */
  start(nowMs: number): void {
    if (this.playbackStart !== null) {
      throw new Error("capture already started");
    }
    this.playbackStart = nowMs;
  }

  record(nowMs: number, x: number, y: number): void {
    if (this.playbackStart === null) {
      throw new Error("capture not started");
    }
    if (this.flushed) {
      throw new Error("capture already flushed");
    }
    let t = nowMs - this.playbackStart;
    if (t < 0) {
      return; // events before playback start carry no stimulus
    }
    const last = this.samples[this.samples.length - 1];
    if (last && t < last[0]) {
      t = last[0]; // clock hiccup: clamp to keep timestamps nondecreasing
    }
    this.samples.push([t, x, y]);
  }

  get length(): number {
    return this.samples.length;
  }

  /** Hand the samples off for upload; a buffer flushes exactly once. */
  flush(): Sample[] {
    if (this.flushed) {
      throw new Error("capture already flushed");
    }
    this.flushed = true;
    return this.samples;
  }
}
