import { describe, expect, it } from "vitest";

import { aspectFitRect, rectContains, videoToScreen } from "../src/geometry.js";

describe("aspectFitRect", () => {
  it("fills the screen when aspects match", () => {
    expect(aspectFitRect(1920, 1080, 1920, 1080)).toEqual({ x: 0, y: 0, w: 1920, h: 1080 });
    expect(aspectFitRect(1280, 720, 1920, 1080)).toEqual({ x: 0, y: 0, w: 1280, h: 720 });
  });

  it("pillarboxes a portrait video on a landscape screen", () => {
    const rect = aspectFitRect(1920, 1080, 1080, 1920);
    expect(rect.h).toBe(1080);
    expect(Math.abs(rect.w - 608)).toBeLessThanOrEqual(1);
    expect(rect.y).toBe(0);
    expect(rect.x).toBeGreaterThan(0);
    // centered within a pixel
    expect(Math.abs(rect.x + rect.w / 2 - 960)).toBeLessThanOrEqual(1);
  });

  it("letterboxes a wide video on a squarer screen", () => {
    const rect = aspectFitRect(1280, 1024, 1920, 1080);
    expect(rect.w).toBe(1280);
    expect(rect.h).toBe(720);
    expect(rect.y).toBe(152);
  });

  it("preserves the aspect ratio within a pixel of rounding", () => {
    for (const [sw, sh, vw, vh] of [
      [1920, 1080, 192, 108],
      [1366, 768, 1920, 1080],
      [2560, 1440, 1080, 1920],
    ]) {
      const rect = aspectFitRect(sw, sh, vw, vh);
      expect(Math.abs(rect.h - (rect.w * vh) / vw)).toBeLessThanOrEqual(1);
      expect(rect.x).toBeGreaterThanOrEqual(0);
      expect(rect.y).toBeGreaterThanOrEqual(0);
      expect(rect.x + rect.w).toBeLessThanOrEqual(sw);
      expect(rect.y + rect.h).toBeLessThanOrEqual(sh);
    }
  });

  it("rejects degenerate sizes", () => {
    expect(() => aspectFitRect(0, 1080, 16, 9)).toThrow();
  });
});

describe("coordinate mapping", () => {
  it("maps video center to rect center", () => {
    const rect = aspectFitRect(1920, 1080, 192, 108);
    const [sx, sy] = videoToScreen(rect, 192, 108, 96, 54);
    expect(sx).toBeCloseTo(960, 6);
    expect(sy).toBeCloseTo(540, 6);
  });

  it("rectContains is inclusive at edges", () => {
    const rect = { x: 10, y: 10, w: 100, h: 50 };
    expect(rectContains(rect, 10, 10)).toBe(true);
    expect(rectContains(rect, 110, 60)).toBe(true);
    expect(rectContains(rect, 111, 60)).toBe(false);
  });
});
