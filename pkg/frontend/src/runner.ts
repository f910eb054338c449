// Trial loop state machine, independent of the DOM.
//
// Phase sequence per stimulus: fixation -> blank -> stimulus flash
// (frame-locked, measured) -> mask -> forced choice -> response POST.
// Choices are only accepted from stimulus offset onward; earlier
// keypresses count as anticipations and are dropped. The next image is
// fetched while the previous response is being wrapped up, so flash
// onset never waits on the network.

import type { TrialApi } from './api.js';
import { ApiError } from './api.js';
import type { FrameClock } from './timing.js';
import { flashStimulus } from './timing.js';
import type {
  SessionParams,
  SessionSummary,
  StimulusDescriptor,
  TrialRecord,
} from './types.js';

export type Phase = 'idle' | 'fixation' | 'blank' | 'stimulus' | 'mask' | 'choice' | 'done';

export interface TrialView {
  showFixation(): void;
  showBlank(): void;
  showStimulus(imageObjectUrl: string): void;
  hideStimulus(): void;
  showMask(): void;
  showChoices(choices: number[], choose: (label: number) => void): void;
  showProgress(answered: number, total: number): void;
  showDone(summary: SessionSummary): void;
  showError(message: string): void;
}

export interface RunnerOptions {
  fixationMs: number;
  blankMs: number;
  maskMs: number;
  maxPostAttempts: number;
  retryBackoffMs: number;
}

export const DEFAULT_OPTIONS: RunnerOptions = {
  fixationMs: 500,
  blankMs: 250,
  maskMs: 250,
  maxPostAttempts: 5,
  retryBackoffMs: 300,
};

interface PreparedStimulus {
  descriptor: StimulusDescriptor;
  imageObjectUrl: string;
}

interface Choice {
  label: number;
  atMs: number;
}

const createObjectUrl: (blob: Blob) => string =
  typeof URL !== 'undefined' && typeof URL.createObjectURL === 'function'
    ? (blob) => URL.createObjectURL(blob)
    : () => 'blob:inline';

export class TrialRunner {
  phase: Phase = 'idle';

  private sessionId = '';
  private armed = false;
  private currentChoices: number[] = [];
  private choiceResolve: ((choice: Choice) => void) | null = null;
  private stopped = false;
  private stopPromise: Promise<null> = new Promise(() => {});
  private stopResolve: (() => void) | null = null;
  private summary: SessionSummary = {
    session_id: '',
    completed: [],
    abandoned: [],
    anticipations: 0,
  };

  constructor(
    private readonly api: TrialApi,
    private readonly clock: FrameClock,
    private readonly view: TrialView,
    private readonly options: RunnerOptions = DEFAULT_OPTIONS,
  ) {}

  /** Submit a choice (key press or button). Ignored before stimulus offset. */
  submitChoice(label: number): boolean {
    if (!this.armed || this.choiceResolve === null) {
      this.summary.anticipations += 1;
      return false;
    }
    if (!this.currentChoices.includes(label)) {
      return false;
    }
    const resolve = this.choiceResolve;
    this.choiceResolve = null;
    this.armed = false;
    resolve({ label, atMs: this.clock.now() });
    return true;
  }

  /** Abandon the session; a stimulus pending a choice gets an explicit
   * abandonment marker instead of a response. */
  stop(): void {
    this.stopped = true;
    this.armed = false;
    this.choiceResolve = null;
    if (this.stopResolve !== null) {
      this.stopResolve();
    }
  }

  async runSession(params: SessionParams): Promise<SessionSummary> {
    const session = await this.api.createSession(params);
    this.sessionId = session.session_id;
    this.stopped = false;
    this.stopPromise = new Promise((resolve) => {
      this.stopResolve = () => resolve(null);
    });
    this.summary = {
      session_id: session.session_id,
      completed: [],
      abandoned: [],
      anticipations: 0,
    };
    try {
      let prepared = this.prepare();
      for (;;) {
        const current = await prepared;
        if (current === null || this.stopped) {
          break;
        }
        this.view.showProgress(current.descriptor.index, current.descriptor.total);
        const answered = await this.runTrial(current);
        if (!answered || this.stopped) {
          break;
        }
        prepared = this.prepare();
      }
      this.phase = 'done';
      this.view.showDone(this.summary);
      return this.summary;
    } catch (err) {
      this.view.showError(err instanceof Error ? err.message : String(err));
      throw err;
    }
  }

  private async prepare(): Promise<PreparedStimulus | null> {
    const next = await this.api.nextStimulus(this.sessionId);
    if (next.done) {
      return null;
    }
    const blob = await this.api.fetchImage(next.image_url);
    return { descriptor: next, imageObjectUrl: createObjectUrl(blob) };
  }

  /** Run one trial; returns false when the stimulus was abandoned. */
  private async runTrial(prepared: PreparedStimulus): Promise<boolean> {
    const { descriptor } = prepared;
    this.phase = 'fixation';
    this.view.showFixation();
    await this.clock.wait(this.options.fixationMs);

    this.phase = 'blank';
    this.view.showBlank();
    await this.clock.wait(this.options.blankMs);

    this.phase = 'stimulus';
    const choicePromise = new Promise<Choice>((resolve) => {
      this.choiceResolve = resolve;
    });
    this.currentChoices = descriptor.choices;
    const flash = await flashStimulus(
      this.clock,
      () => this.view.showStimulus(prepared.imageObjectUrl),
      () => {
        this.view.hideStimulus();
        this.view.showMask();
      },
      descriptor.exposure_ms,
    );
    // responses count from stimulus offset; anything earlier was dropped
    this.armed = true;
    this.phase = 'mask';
    await this.clock.wait(this.options.maskMs);

    this.phase = 'choice';
    this.view.showChoices(descriptor.choices, (label) => this.submitChoice(label));
    const choice = await Promise.race([choicePromise, this.stopPromise]);
    if (choice === null) {
      this.summary.abandoned.push(descriptor.image_id);
      return false;
    }
    const responseMs = Math.max(0, choice.atMs - flash.offsetAt);

    await this.postWithRetry({
      image_id: descriptor.image_id,
      chosen_label: choice.label,
      response_ms: responseMs,
      flash_ms: flash.measuredMs,
    });
    this.summary.completed.push({
      image_id: descriptor.image_id,
      chosen_label: choice.label,
      response_ms: responseMs,
      flash_ms: flash.measuredMs,
      planned_frames: flash.plannedFrames,
      flash_deviation_ms: flash.measuredMs - descriptor.exposure_ms,
    } satisfies TrialRecord);
    return true;
  }

  private async postWithRetry(body: {
    image_id: string;
    chosen_label: number;
    response_ms: number;
    flash_ms: number;
  }): Promise<void> {
    for (let attempt = 1; ; attempt++) {
      try {
        await this.api.recordResponse(this.sessionId, body);
        return;
      } catch (err) {
        if (err instanceof ApiError) {
          if (err.status === 409) {
            // the server already holds this response (lost ack); not a loss
            return;
          }
          throw err; // 4xx/5xx other than conflict: protocol bug, surface it
        }
        if (attempt >= this.options.maxPostAttempts) {
          throw new Error(
            `response for ${body.image_id} could not be delivered after ` +
              `${attempt} attempts: ${err instanceof Error ? err.message : err}`,
          );
        }
        this.view.showError(`network hiccup, retrying (${attempt})`);
        await this.clock.wait(this.options.retryBackoffMs * attempt);
      }
    }
  }
}
