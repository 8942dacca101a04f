/** Chart bucket math and coordinate scaling, kept DOM-free for testing. */

export interface TimelinePoint {
  frame: number;
  time_ms: number;
  heart_rate: number;
  breath_rate: number;
  audio_energy: number;
}

export interface Scale {
  min: number;
  max: number;
}

/** Bucket size so the series fits the chart at roughly one point per pixel. */
export function bucketForWidth(frameCount: number, pixelWidth: number): number {
  if (pixelWidth <= 0) return 1;
  return Math.max(1, Math.ceil(frameCount / pixelWidth));
}

export function valueScale(values: number[], pad = 0.1): Scale {
  if (values.length === 0) return { min: 0, max: 1 };
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const span = max - min;
  return { min: min - pad * span, max: max + pad * span };
}

export function toPixelY(value: number, scale: Scale, height: number): number {
  const t = (value - scale.min) / (scale.max - scale.min);
  return height - t * height;
}

export function frameToPixelX(frame: number, frameCount: number,
                              width: number): number {
  if (frameCount <= 1) return 0;
  return (frame / (frameCount - 1)) * width;
}

export function pixelXToFrame(x: number, frameCount: number,
                              width: number): number {
  if (width <= 0) return 0;
  const frame = Math.round((x / width) * (frameCount - 1));
  return Math.min(frameCount - 1, Math.max(0, frame));
}
