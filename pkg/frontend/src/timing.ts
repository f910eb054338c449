// Frame-locked timing.
//
// Browsers cannot flash a stimulus for an arbitrary number of
// milliseconds: visibility changes land on vsync boundaries. Requested
// exposures are therefore rounded to an integer frame count at the
// detected refresh period, and the flash duration actually achieved is
// measured from frame callback timestamps, never assumed.

export interface FrameClock {
  /** Current time in ms on the same axis as frame timestamps. */
  now(): number;
  /** Schedule a callback for the next frame; passes the frame timestamp. */
  requestFrame(cb: (timestamp: number) => void): void;
  /** Resolve after roughly ms (frame-quantized in simulation). */
  wait(ms: number): Promise<void>;
  /** Detected frame period in ms (e.g. ~16.67 at 60 Hz). */
  framePeriodMs(): Promise<number>;
}

export function nextFrame(clock: FrameClock): Promise<number> {
  return new Promise((resolve) => clock.requestFrame(resolve));
}

export interface FlashResult {
  requestedMs: number;
  plannedFrames: number;
  measuredMs: number;
  onsetAt: number;
  offsetAt: number;
}

/**
 * Show the stimulus for the frame count closest to requestedMs.
 *
 * Onset is the first frame timestamp with the stimulus visible and
 * offset the first with it hidden again, so measuredMs is the actual
 * painted span, dropped frames included.
 */
export async function flashStimulus(
  clock: FrameClock,
  show: () => void,
  hide: () => void,
  requestedMs: number,
): Promise<FlashResult> {
  const period = await clock.framePeriodMs();
  const plannedFrames = Math.max(1, Math.round(requestedMs / period));
  show();
  const onsetAt = await nextFrame(clock);
  for (let i = 1; i < plannedFrames; i++) {
    await nextFrame(clock);
  }
  hide();
  const offsetAt = await nextFrame(clock);
  return {
    requestedMs,
    plannedFrames,
    measuredMs: offsetAt - onsetAt,
    onsetAt,
    offsetAt,
  };
}

/** requestAnimationFrame-backed clock for real browsers. */
export class BrowserFrameClock implements FrameClock {
  private period: number | null = null;

  now(): number {
    return performance.now();
  }

  requestFrame(cb: (timestamp: number) => void): void {
    requestAnimationFrame(cb);
  }

  wait(ms: number): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, ms));
  }

  async framePeriodMs(): Promise<number> {
    if (this.period !== null) {
      return this.period;
    }
    const stamps: number[] = [];
    let t = await nextFrame(this);
    stamps.push(t);
    for (let i = 0; i < 20; i++) {
      t = await nextFrame(this);
      stamps.push(t);
    }
    const deltas = stamps
      .slice(1)
      .map((v, i) => v - stamps[i])
      .sort((a, b) => a - b);
    const median = deltas[Math.floor(deltas.length / 2)];
    // Guard against wild measurements on a busy main thread.
    this.period = Math.min(Math.max(median, 4), 50);
    return this.period;
  }
}

/**
 * Deterministic clock for scripted sessions: frames tick at a fixed
 * period on the task queue, so awaited network work still interleaves.
 */
export class SimulatedFrameClock implements FrameClock {
  private time = 0;
  private queue: Array<(timestamp: number) => void> = [];
  private tickScheduled = false;

  constructor(private readonly period: number = 1000 / 60) {}

  now(): number {
    return this.time;
  }

  requestFrame(cb: (timestamp: number) => void): void {
    this.queue.push(cb);
    this.scheduleTick();
  }

  wait(ms: number): Promise<void> {
    const frames = Math.max(1, Math.ceil(ms / this.period));
    return (async () => {
      for (let i = 0; i < frames; i++) {
        await nextFrame(this);
      }
    })();
  }

  framePeriodMs(): Promise<number> {
    return Promise.resolve(this.period);
  }

  private scheduleTick(): void {
    if (this.tickScheduled) {
      return;
    }
    this.tickScheduled = true;
    setTimeout(() => {
      this.tickScheduled = false;
      const callbacks = this.queue;
      this.queue = [];
      this.time += this.period;
      for (const cb of callbacks) {
        cb(this.time);
      }
      if (this.queue.length > 0) {
        this.scheduleTick();
      }
    }, 0);
  }
}
