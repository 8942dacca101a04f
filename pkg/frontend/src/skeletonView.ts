/** Canvas renderer for the per-frame 3-D skeleton (front-view projection). */

import type { Joint3 } from "./logic/skeleton.js";
import { BONES, projectFrontView } from "./logic/skeleton.js";
import type { Api } from "./api.js";

const CHUNK = 120; // frames fetched per request

export class SkeletonView {
  private cache = new Map<number, Joint3[]>();
  private inFlight = new Set<number>();
  private frameCount = 0;
  private sessionId = "";

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly api: Api) {}

  async load(sessionId: string, frameCount: number): Promise<void> {
    this.sessionId = sessionId;
    this.frameCount = frameCount;
    this.cache.clear();
    this.inFlight.clear();
    await this.ensureChunk(0);
  }

  private async ensureChunk(chunkIndex: number): Promise<void> {
    if (this.inFlight.has(chunkIndex)) return;
    const from = chunkIndex * CHUNK;
    if (from >= this.frameCount || this.cache.has(from)) return;
    this.inFlight.add(chunkIndex);
    try {
      const to = Math.min(from + CHUNK, this.frameCount);
      const doc = await this.api.skeleton(this.sessionId, from, to);
      doc.frames.forEach((joints, offset) => this.cache.set(from + offset, joints));
    } finally {
      this.inFlight.delete(chunkIndex);
    }
  }

  drawFrame(frame: number): void {
    const joints = this.cache.get(frame);
    const chunkIndex = Math.floor(frame / CHUNK);
    void this.ensureChunk(chunkIndex);
    void this.ensureChunk(chunkIndex + 1); // prefetch ahead of playback
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#11151c";
    ctx.fillRect(0, 0, width, height);
    if (!joints) {
      ctx.fillStyle = "#888";
      ctx.font = "12px sans-serif";
      ctx.fillText("loading frames...", 10, 20);
      return;
    }
    const projected = projectFrontView(joints, { width, height, margin: 24 });
    ctx.strokeStyle = "#6fc3df";
    ctx.lineWidth = 2;
    for (const [a, b] of BONES) {
      ctx.beginPath();
      ctx.moveTo(projected[a].x, projected[a].y);
      ctx.lineTo(projected[b].x, projected[b].y);
      ctx.stroke();
    }
    ctx.fillStyle = "#ffd479";
    for (const point of projected) {
      ctx.beginPath();
      ctx.arc(point.x, point.y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
