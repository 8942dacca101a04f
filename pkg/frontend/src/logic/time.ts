/** Frame/time arithmetic mirroring the service's clock conventions. */

export interface ClockInfo {
  startTimeMs: number;
  frameRate: number;
  frameCount: number;
}

export function timeForFrame(clock: ClockInfo, frame: number): number {
  return clock.startTimeMs + Math.round((frame * 1000) / clock.frameRate);
}

/**
 * Frame whose half-open interval contains the given session time: the
 * largest i with timeForFrame(i) <= t. Frame times are rounded to whole
 * milliseconds, so the estimate is nudged until it inverts exactly.
 */
export function frameForTime(clock: ClockInfo, timeMs: number): number {
  const t = timeMs - clock.startTimeMs;
  let frame = Math.floor(((t + 0.5) * clock.frameRate) / 1000);
  while (frame > 0 && Math.round((frame * 1000) / clock.frameRate) > t) {
    frame -= 1;
  }
  while (Math.round(((frame + 1) * 1000) / clock.frameRate) <= t) {
    frame += 1;
  }
  return clamp(frame, 0, clock.frameCount - 1);
}

export function clamp(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, value));
}

/**
 * Maps the audio element's clock to a chart reference frame.
 *
 * The chart redraws on animation frames between audio `timeupdate` events,
 * so the last reported audio time is extrapolated by wall-clock elapsed
 * time multiplied by the playback rate. At 1x this keeps the reference
 * line within one frame of the true audio position.
 */
export class PlaybackSync {
  private anchorAudioSec = 0;
  private anchorWallMs = 0;
  private playing = false;

  constructor(private readonly clock: ClockInfo,
              private rate: number = 1.0) {}

  setRate(rate: number): void {
    this.rate = rate;
  }

  /** Record an authoritative audio position (from `timeupdate`/seek). */
  update(audioSec: number, wallMs: number, playing: boolean): void {
    this.anchorAudioSec = audioSec;
    this.anchorWallMs = wallMs;
    this.playing = playing;
  }

  /** Estimated audio position at an arbitrary wall-clock instant. */
  positionSec(wallMs: number): number {
    if (!this.playing) {
      return this.anchorAudioSec;
    }
    return this.anchorAudioSec + ((wallMs - this.anchorWallMs) / 1000) * this.rate;
  }

  referenceFrame(wallMs: number): number {
    const sessionMs = this.clock.startTimeMs + this.positionSec(wallMs) * 1000;
    return frameForTime(this.clock, sessionMs);
  }
}
