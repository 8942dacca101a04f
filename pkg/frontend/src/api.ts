/** Typed client for the annotation service HTTP API. */

import type { AnnotationRecord } from "./logic/spans.js";
import type { TimelinePoint } from "./logic/timeline.js";
import type { Joint3 } from "./logic/skeleton.js";

export interface SessionSummary {
  session_id: string;
  game_id: number;
  frame_count: number;
  frame_rate: number;
  duration_ms: number;
  annotators: string[];
}

export interface ManifestDoc {
  session_id: string;
  aligned_clock: { start_time_ms: number; frame_rate: number; frame_count: number };
}

export interface TimelineDoc {
  bucket: number;
  frame_rate: number;
  frame_count: number;
  start_time_ms: number;
  points: TimelinePoint[];
}

export interface FusedDoc {
  sufficient: boolean;
  annotators: string[];
  levels: number[];
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number, readonly code: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let code = "error";
    let message = `${response.status} ${response.statusText}`;
    try {
      const doc = await response.json();
      code = doc.code ?? code;
      message = doc.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(message, response.status, code);
  }
  return response.json() as Promise<T>;
}

export class Api {
  constructor(private readonly base: string = "") {}

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return request(`${this.base}/sessions`);
  }

  manifest(id: string): Promise<ManifestDoc> {
    return request(`${this.base}/sessions/${id}/manifest`);
  }

  timeline(id: string, bucket: number): Promise<TimelineDoc> {
    return request(`${this.base}/sessions/${id}/timeline?bucket=${bucket}`);
  }

  skeleton(id: string, from: number, to: number): Promise<{ frames: Joint3[][] }> {
    return request(`${this.base}/sessions/${id}/skeleton?from=${from}&to=${to}`);
  }

  annotations(id: string): Promise<{ records: AnnotationRecord[] }> {
    return request(`${this.base}/sessions/${id}/annotations`);
  }

  fused(id: string): Promise<FusedDoc> {
    return request(`${this.base}/sessions/${id}/fused`);
  }

  postAnnotation(id: string, annotator: string, startMs: number, endMs: number,
                 level: number): Promise<{ record_id: string; superseded: string[] }> {
    return request(`${this.base}/sessions/${id}/annotations`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-Annotator-Id": annotator,
      },
      body: JSON.stringify({ start: startMs, end: endMs, level }),
    });
  }

  audioUrl(id: string): string {
    return `${this.base}/sessions/${id}/audio`;
  }
}
