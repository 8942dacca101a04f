/** Timeline chart: physiology and audio energy with a playback reference line. */

import type { TimelinePoint } from "./logic/timeline.js";
import { frameToPixelX, toPixelY, valueScale } from "./logic/timeline.js";

const SERIES: Array<{ key: keyof TimelinePoint; color: string; label: string }> = [
  { key: "heart_rate", color: "#c0504d", label: "heart rate" },
  { key: "breath_rate", color: "#4f81bd", label: "breath rate" },
  { key: "audio_energy", color: "#9bbb59", label: "audio energy" },
];

export class TimelineChart {
  private points: TimelinePoint[] = [];
  private frameCount = 0;
  private referenceFrame = 0;

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly onSeek: (frame: number) => void) {
    canvas.addEventListener("click", (event) => {
      const rect = canvas.getBoundingClientRect();
      const x = ((event.clientX - rect.left) / rect.width) * canvas.width;
      if (this.frameCount > 1) {
        const frame = Math.round((x / canvas.width) * (this.frameCount - 1));
        this.onSeek(Math.min(this.frameCount - 1, Math.max(0, frame)));
      }
    });
  }

  setData(points: TimelinePoint[], frameCount: number): void {
    this.points = points;
    this.frameCount = frameCount;
    this.draw();
  }

  setReferenceFrame(frame: number): void {
    if (frame !== this.referenceFrame) {
      this.referenceFrame = frame;
      this.draw();
    }
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#fafafa";
    ctx.fillRect(0, 0, width, height);
    if (this.points.length === 0) return;

    const laneHeight = height / SERIES.length;
    SERIES.forEach((series, lane) => {
      const values = this.points.map((p) => p[series.key] as number);
      const scale = valueScale(values);
      ctx.strokeStyle = series.color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      this.points.forEach((point, i) => {
        const x = frameToPixelX(point.frame, this.frameCount, width);
        const y = lane * laneHeight +
          toPixelY(values[i], scale, laneHeight - 6) + 3;
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
      ctx.fillStyle = series.color;
      ctx.font = "11px sans-serif";
      ctx.fillText(series.label, 6, lane * laneHeight + 13);
    });

    const refX = frameToPixelX(this.referenceFrame, this.frameCount, width);
    ctx.strokeStyle = "#222";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(refX, 0);
    ctx.lineTo(refX, height);
    ctx.stroke();
  }
}
