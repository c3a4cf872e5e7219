/** Display geometry helpers shared by playback and upload. */

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/**
 * Largest centered rectangle with the video's aspect ratio that fits the
 * screen (letterboxed or pillarboxed, integer pixel sizes).
 */
export function aspectFitRect(screenW: number, screenH: number, videoW: number, videoH: number): Rect {
  if (videoW <= 0 || videoH <= 0 || screenW <= 0 || screenH <= 0) {
    throw new Error(`invalid sizes: screen ${screenW}x${screenH}, video ${videoW}x${videoH}`);
  }
  const scale = Math.min(screenW / videoW, screenH / videoH);
  const w = Math.round(videoW * scale);
  const h = Math.round(videoH * scale);
  return {
    x: Math.floor((screenW - w) / 2),
    y: Math.floor((screenH - h) / 2),
    w,
    h,
  };
}

export function rectContains(rect: Rect, x: number, y: number): boolean {
  return x >= rect.x && x <= rect.x + rect.w && y >= rect.y && y <= rect.y + rect.h;
}

/** Screen position of a point given in video coordinates. */
export function videoToScreen(rect: Rect, videoW: number, videoH: number, vx: number, vy: number): [number, number] {
  return [rect.x + (vx * rect.w) / videoW, rect.y + (vy * rect.h) / videoH];
}
