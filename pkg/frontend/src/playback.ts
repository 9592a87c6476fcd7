// Playback timing: wall-clock ticks map to source frames at the chosen
// speed multiplier. Frames are skipped rather than slowed down when the
// display loop cannot keep up, so 2.0x on a 100 FPS source consumes 200
// source frames per wall-clock second regardless of tick rate.

import type { FramePerson, StreamClient } from "./streamClient.js";

export class PlaybackClock {
  playing = false;
  private position = 0; // fractional frame cursor

  constructor(
    readonly fps: number,
    readonly frameCount: number,
    private speed = 1.0,
  ) {
    if (fps <= 0) throw new Error("fps must be positive");
  }

  get frame(): number {
    return Math.min(Math.floor(this.position), Math.max(this.frameCount - 1, 0));
  }

  getSpeed(): number {
    return this.speed;
  }

  setSpeed(value: number): void {
    if (!(value > 0)) throw new Error("speed must be > 0");
    this.speed = value;
  }

  seek(frame: number): void {
    this.position = Math.min(Math.max(frame, 0), Math.max(this.frameCount - 1, 0));
  }

  get ended(): boolean {
    return this.position >= this.frameCount - 1e-9 && this.frameCount > 0;
  }

  /**
   * Advance by a wall-clock interval (seconds). Returns the frame to
   * display, or null when nothing changed or playback is paused.
   */
  tick(wallDt: number): number | null {
    if (!this.playing || this.frameCount === 0) return null;
    const before = this.frame;
    this.position = Math.min(
      this.position + wallDt * this.fps * this.speed,
      this.frameCount - 1e-9,
    );
    const after = this.frame;
    if (this.ended) this.playing = false;
    return after !== before || before === 0 ? after : null;
  }

  /** Source frames per wall second at the current speed. */
  consumptionRate(): number {
    return this.fps * this.speed;
  }
}

export interface StepResult {
  displayed: number | null;
  people: FramePerson[] | null;
}

/**
 * One playback step: advance the clock, fetch and hand over the frame to
 * display, then warm the cache for the frame the next tick will land on.
 * This is the only fetch path during playback, so transfer stays
 * proportional to what is actually shown.
 */
export async function playbackStep(
  clock: PlaybackClock,
  stream: StreamClient,
  wallDt: number,
  display: (frame: number, people: FramePerson[]) => void,
): Promise<StepResult> {
  const frame = clock.tick(wallDt);
  if (frame === null) return { displayed: null, people: null };
  const people = await stream.frame(frame);
  display(frame, people);
  const stride = Math.max(1, Math.round(wallDt * clock.consumptionRate()));
  stream.prefetch(frame + stride);
  return { displayed: frame, people };
}
