/** Page wiring: session list, synchronized playback, toolbar, record list. */

import { Api, ApiError } from "./api.js";
import type { SessionSummary } from "./api.js";
import { TimelineChart } from "./chart.js";
import { SkeletonView } from "./skeletonView.js";
import { RecordList, validateSpan } from "./logic/spans.js";
import type { ListedRecord } from "./logic/spans.js";
import { bucketForWidth } from "./logic/timeline.js";
import { ClockInfo, PlaybackSync, clamp, timeForFrame } from "./logic/time.js";

const api = new Api("");

interface State {
  sessionId: string | null;
  clock: ClockInfo | null;
  currentFrame: number;
  selectedLevel: number | null; // null until the annotator picks one
  pendingStartFrame: number | null;
}

const state: State = {
  sessionId: null,
  clock: null,
  currentFrame: 0,
  selectedLevel: null,
  pendingStartFrame: null,
};

const records = new RecordList();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const audio = el<HTMLAudioElement>("audio");
const chartCanvas = el<HTMLCanvasElement>("chart");
const skeletonCanvas = el<HTMLCanvasElement>("skeleton");
const sessionList = el<HTMLUListElement>("session-list");
const recordsTable = el<HTMLTableSectionElement>("records-body");
const statusLine = el<HTMLDivElement>("status");
const frameLabel = el<HTMLSpanElement>("frame-label");
const fusedLine = el<HTMLDivElement>("fused-line");

const skeletonView = new SkeletonView(skeletonCanvas, api);
const chart = new TimelineChart(chartCanvas, (frame) => seekToFrame(frame));
let sync: PlaybackSync | null = null;

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "status error" : "status";
}

function seekToFrame(frame: number): void {
  if (!state.clock) return;
  state.currentFrame = clamp(frame, 0, state.clock.frameCount - 1);
  const sessionMs = timeForFrame(state.clock, state.currentFrame);
  audio.currentTime = (sessionMs - state.clock.startTimeMs) / 1000;
  render();
}

function render(): void {
  if (!state.clock) return;
  chart.setReferenceFrame(state.currentFrame);
  skeletonView.drawFrame(state.currentFrame);
  frameLabel.textContent =
    `frame ${state.currentFrame} / ${state.clock.frameCount - 1}` +
    (state.pendingStartFrame !== null
      ? ` | span start at ${state.pendingStartFrame}`
      : "");
}

function renderRecords(): void {
  recordsTable.innerHTML = "";
  for (const record of records.all()) {
    const row = document.createElement("tr");
    if (record.superseded_by !== null) row.className = "superseded";
    else if ("pending" in record && (record as ListedRecord & { pending?: boolean }).pending) {
      row.className = "pending";
    }
    row.innerHTML =
      `<td>${record.record_id}</td><td>${record.annotator_id}</td>` +
      `<td>${record.start}-${record.end}</td><td>${record.level}</td>`;
    recordsTable.appendChild(row);
  }
}

async function refreshFused(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const fused = await api.fused(state.sessionId);
    const nonZero = fused.levels.filter((lv) => lv > 0).length;
    fusedLine.textContent = fused.sufficient
      ? `fused: ${nonZero} fear frames of ${fused.levels.length} ` +
        `(annotators: ${fused.annotators.join(", ")})`
      : `fused: waiting for a second annotator (have: ${fused.annotators.join(", ") || "none"})`;
  } catch (error) {
    fusedLine.textContent = `fused labels unavailable: ${(error as Error).message}`;
  }
}

async function loadSession(summary: SessionSummary): Promise<void> {
  const manifest = await api.manifest(summary.session_id);
  state.sessionId = summary.session_id;
  state.clock = {
    startTimeMs: manifest.aligned_clock.start_time_ms,
    frameRate: manifest.aligned_clock.frame_rate,
    frameCount: manifest.aligned_clock.frame_count,
  };
  state.currentFrame = 0;
  state.pendingStartFrame = null;
  sync = new PlaybackSync(state.clock, audio.playbackRate);

  audio.src = api.audioUrl(summary.session_id);
  const bucket = bucketForWidth(state.clock.frameCount, chartCanvas.width);
  const timeline = await api.timeline(summary.session_id, bucket);
  chart.setData(timeline.points, state.clock.frameCount);
  await skeletonView.load(summary.session_id, state.clock.frameCount);
  const existing = await api.annotations(summary.session_id);
  records.load(existing.records);
  renderRecords();
  await refreshFused();
  setStatus(`loaded ${summary.session_id}: ${state.clock.frameCount} frames ` +
            `@ ${state.clock.frameRate} fps`);
  render();
}

async function showSessions(): Promise<void> {
  try {
    const doc = await api.listSessions();
    sessionList.innerHTML = "";
    for (const summary of doc.sessions) {
      const item = document.createElement("li");
      const seconds = (summary.duration_ms / 1000).toFixed(1);
      item.textContent = `${summary.session_id} (game ${summary.game_id}, ${seconds}s)`;
      item.addEventListener("click", () => {
        void loadSession(summary).catch((error: Error) =>
          setStatus(`failed to load: ${error.message}`, true));
      });
      sessionList.appendChild(item);
    }
    if (doc.sessions.length === 0) setStatus("no sessions served", true);
  } catch (error) {
    setStatus(`cannot reach service: ${(error as Error).message}`, true);
  }
}

function annotatorId(): string {
  return (el<HTMLInputElement>("annotator")).value.trim() || "anonymous";
}

async function submitSpan(startFrame: number, endFrame: number): Promise<void> {
  if (!state.clock || !state.sessionId) return;
  if (state.selectedLevel === null) {
    setStatus("pick a fear level between 1 and 5", true);
    return;
  }
  const draft = {
    startMs: timeForFrame(state.clock, startFrame),
    endMs: timeForFrame(state.clock, Math.min(endFrame, state.clock.frameCount - 1)) +
      Math.round(1000 / state.clock.frameRate),
    level: state.selectedLevel,
  };
  const problem = validateSpan(draft);
  if (problem) {
    setStatus(problem, true);
    return;
  }
  const tempId = records.add(annotatorId(), draft);
  renderRecords();
  try {
    const result = await api.postAnnotation(
      state.sessionId, annotatorId(), draft.startMs, draft.endMs, draft.level);
    records.confirm(tempId, result.record_id);
    setStatus(`saved ${result.record_id} (level ${draft.level})`);
  } catch (error) {
    records.rollback(tempId);
    const message = error instanceof ApiError
      ? `rejected: ${error.message}` : (error as Error).message;
    setStatus(message, true);
  }
  renderRecords();
  await refreshFused();
}

function wireToolbar(): void {
  const buttons = document.querySelectorAll<HTMLButtonElement>("[data-level]");
  buttons.forEach((button) => {
    button.addEventListener("click", () => {
      state.selectedLevel = Number(button.dataset.level);
      buttons.forEach((b) => b.classList.toggle("active", b === button));
      render();
    });
  });

  el<HTMLButtonElement>("mark-start").addEventListener("click", () => {
    state.pendingStartFrame = state.currentFrame;
    render();
  });

  el<HTMLButtonElement>("mark-end").addEventListener("click", () => {
    if (state.pendingStartFrame === null) {
      setStatus("mark a span start first", true);
      return;
    }
    if (state.pendingStartFrame >= state.currentFrame) {
      setStatus("span start must come before its end", true);
      return;
    }
    const start = state.pendingStartFrame;
    state.pendingStartFrame = null;
    void submitSpan(start, state.currentFrame);
  });

  el<HTMLButtonElement>("play").addEventListener("click", () => {
    if (audio.paused) void audio.play();
    else audio.pause();
  });

  el<HTMLInputElement>("rate").addEventListener("change", (event) => {
    const rate = Number((event.target as HTMLInputElement).value);
    audio.playbackRate = rate;
    sync?.setRate(rate);
  });
}

function wirePlayback(): void {
  const report = () =>
    sync?.update(audio.currentTime, performance.now(), !audio.paused);
  audio.addEventListener("timeupdate", report);
  audio.addEventListener("play", report);
  audio.addEventListener("pause", report);
  audio.addEventListener("seeked", report);

  const tick = () => {
    if (sync && state.clock && !audio.paused) {
      state.currentFrame = sync.referenceFrame(performance.now());
      render();
    }
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

wireToolbar();
wirePlayback();
void showSessions();
