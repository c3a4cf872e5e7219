/**
 * Blur-everywhere-except-the-cursor overlay.
 *
 * The video is shown Gaussian-blurred with sigma = 2% of the screen width;
 * a clear circular aperture of radius 2*sigma follows the cursor, fading
 * back to fully blurred over one extra sigma.
 */

export const BLUR_SIGMA_FRACTION = 0.02;

export interface BlurConfig {
  sigmaPx: number;
  apertureRadiusPx: number;
  falloffPx: number;
}

export function blurConfigForScreen(screenW: number): BlurConfig {
  const sigmaPx = BLUR_SIGMA_FRACTION * screenW;
  return { sigmaPx, apertureRadiusPx: 2 * sigmaPx, falloffPx: sigmaPx };
}

/**
 * Opacity of the BLURRED layer at a given distance from the cursor:
 * 0 inside the aperture (sharp video visible), rising smoothly to 1 across
 * the falloff band.
 */
export function blurAlphaAt(distancePx: number, config: BlurConfig): number {
  if (distancePx <= config.apertureRadiusPx) {
    return 0;
  }
  const t = (distancePx - config.apertureRadiusPx) / config.falloffPx;
  if (t >= 1) {
    return 1;
  }
  return 0.5 - 0.5 * Math.cos(Math.PI * t); // smooth ease over one sigma
}

/**
 * Composite one overlay frame: blurred video everywhere, with a radial
 * mask cutting the aperture around the cursor.  Runs once per display
 * frame so the aperture is never more than one frame behind the cursor.
 */
export function renderBlurOverlay(
  ctx: CanvasRenderingContext2D,
  video: CanvasImageSource,
  rect: { x: number; y: number; w: number; h: number },
  cursor: { x: number; y: number },
  config: BlurConfig,
): void {
  const { canvas } = ctx;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.filter = `blur(${config.sigmaPx}px)`;
  ctx.drawImage(video, rect.x, rect.y, rect.w, rect.h);
  ctx.filter = "none";

  // punch the aperture: destination-out with a radial gradient
  const outer = config.apertureRadiusPx + config.falloffPx;
  const gradient = ctx.createRadialGradient(cursor.x, cursor.y, 0, cursor.x, cursor.y, outer);
  const steps = 8;
  for (let i = 0; i <= steps; i++) {
    const d = (outer * i) / steps;
    gradient.addColorStop(d / outer, `rgba(0,0,0,${1 - blurAlphaAt(d, config)})`);
  }
  ctx.save();
  ctx.globalCompositeOperation = "destination-out";
  ctx.fillStyle = gradient;
  ctx.beginPath();
  ctx.arc(cursor.x, cursor.y, outer, 0, 2 * Math.PI);
  ctx.fill();
  ctx.restore();
}
