/**
 * Reaction speed test: a rectangle slides along the screen border at
 * constant speed, one full loop per period; the participant must keep the
 * cursor inside it.  The trajectory parameters come from the server so
 * client animation and server scoring agree exactly.
 */

import type { Sample } from "./capture.js";

export interface TrajectoryParams {
  screen_w: number;
  screen_h: number;
  rect_w: number;
  rect_h: number;
  period_ms: number;
  start_corner: string;
  clockwise: boolean;
}

export const REACTION_ATTEMPTS = 3;

const CORNERS = ["top_left", "top_right", "bottom_right", "bottom_left"];

export class RectTrajectory {
  constructor(readonly params: TrajectoryParams) {
    if (!CORNERS.includes(params.start_corner)) {
      throw new Error(`unknown corner ${params.start_corner}`);
    }
    if (params.rect_w > params.screen_w || params.rect_h > params.screen_h) {
      throw new Error("rectangle larger than screen");
    }
  }

  private get travel(): [number, number] {
    return [this.params.screen_w - this.params.rect_w, this.params.screen_h - this.params.rect_h];
  }

  get pathLength(): number {
    const [a, b] = this.travel;
    return 2 * (a + b);
  }

  private cornerDistance(corner: string): number {
    const [a, b] = this.travel;
    return { top_left: 0, top_right: a, bottom_right: a + b, bottom_left: 2 * a + b }[corner]!;
  }

  /** Top-left corner of the rectangle at time t. */
  originAt(tMs: number): [number, number] {
    const [a, b] = this.travel;
    const length = this.pathLength;
    if (length === 0) {
      return [0, 0];
    }
    const step = length * (tMs / this.params.period_ms);
    let d = this.cornerDistance(this.params.start_corner) + (this.params.clockwise ? step : -step);
    d = ((d % length) + length) % length;
    if (d < a) {
      return [d, 0];
    }
    if (d < a + b) {
      return [a, d - a];
    }
    if (d < 2 * a + b) {
      return [a - (d - a - b), b];
    }
    return [0, b - (d - 2 * a - b)];
  }

  centerAt(tMs: number): [number, number] {
    const [ox, oy] = this.originAt(tMs);
    return [ox + this.params.rect_w / 2, oy + this.params.rect_h / 2];
  }

  contains(tMs: number, x: number, y: number): boolean {
    const [ox, oy] = this.originAt(tMs);
    return x >= ox && x <= ox + this.params.rect_w && y >= oy && y <= oy + this.params.rect_h;
  }
}

/**
 * Run one animated attempt in the browser, recording the cursor every
 * animation frame.  Restarts from scratch if the tab loses visibility.
 */
export function runReactionAttempt(
  trajectory: RectTrajectory,
  drawRect: (x: number, y: number) => void,
  cursor: () => [number, number],
  raf: (cb: (t: number) => void) => void = requestAnimationFrame.bind(globalThis),
): Promise<Sample[]> {
  return new Promise((resolve) => {
    const samples: Sample[] = [];
    let start: number | null = null;
    const tick = (now: number) => {
      if (start === null) {
        start = now;
      }
      const t = now - start;
      if (typeof document !== "undefined" && document.hidden) {
        // attempt restarted: discard and begin again on the next frame
        samples.length = 0;
        start = null;
        raf(tick);
        return;
      }
      if (t >= trajectory.params.period_ms) {
        resolve(samples);
        return;
      }
      const [ox, oy] = trajectory.originAt(t);
      drawRect(ox, oy);
      const [cx, cy] = cursor();
      samples.push([t, cx, cy]);
      raf(tick);
    };
    raf(tick);
  });
}

/** Scripted cursor glued to the rectangle center (used by synthetic runs). */
export function followCenterSamples(trajectory: RectTrajectory, stepMs = 50): Sample[] {
  const samples: Sample[] = [];
  for (let t = 0; t <= trajectory.params.period_ms; t += stepMs) {
    const [cx, cy] = trajectory.centerAt(t);
    samples.push([t, cx, cy]);
  }
  return samples;
}
