// DOM view: one stage element per phase, text-only choice buttons with
// numeric hotkeys. The stimulus <img> exists only while it is flashed,
// so no pending stimulus pixels (or labels) linger in the DOM.

import type { TrialView } from './runner.js';
import type { SessionSummary } from './types.js';

const SHAPE_NAMES: Record<number, string> = {
  3: 'triangle',
  4: 'square',
  5: 'pentagon',
  6: 'hexagon',
  7: 'heptagon',
  8: 'octagon',
};

export function shapeName(sides: number): string {
  return SHAPE_NAMES[sides] ?? `${sides}-gon`;
}

export class DomView implements TrialView {
  private stage: HTMLElement;
  private choicesBar: HTMLElement;
  private status: HTMLElement;
  private image: HTMLImageElement | null = null;

  constructor(root: HTMLElement) {
    root.innerHTML = '';
    this.stage = document.createElement('div');
    this.stage.className = 'stage';
    this.choicesBar = document.createElement('div');
    this.choicesBar.className = 'choices';
    this.status = document.createElement('div');
    this.status.className = 'status';
    root.append(this.stage, this.choicesBar, this.status);
  }

  private clearStage(): void {
    this.stage.innerHTML = '';
    this.image = null;
  }

  showFixation(): void {
    this.clearStage();
    this.choicesBar.innerHTML = '';
    const cross = document.createElement('div');
    cross.className = 'fixation';
    cross.textContent = '+';
    this.stage.append(cross);
  }

  showBlank(): void {
    this.clearStage();
  }

  showStimulus(imageObjectUrl: string): void {
    this.clearStage();
    const img = document.createElement('img');
    img.className = 'stimulus';
    img.alt = '';
    img.draggable = false;
    img.src = imageObjectUrl;
    this.image = img;
    this.stage.append(img);
  }

  hideStimulus(): void {
    if (this.image !== null) {
      this.image.remove();
      this.image = null;
    }
  }

  showMask(): void {
    this.clearStage(); // plain white field
  }

  showChoices(choices: number[], choose: (label: number) => void): void {
    this.choicesBar.innerHTML = '';
    for (const label of choices) {
      const button = document.createElement('button');
      button.type = 'button';
      button.dataset.label = String(label);
      button.textContent = `${shapeName(label)} (${label})`;
      button.addEventListener('click', () => choose(label));
      this.choicesBar.append(button);
    }
  }

  showProgress(answered: number, total: number): void {
    this.status.textContent = `trial ${answered + 1} / ${total}`;
  }

  showDone(summary: SessionSummary): void {
    this.clearStage();
    this.choicesBar.innerHTML = '';
    const box = document.createElement('div');
    box.className = 'summary';
    const mean =
      summary.completed.length > 0
        ? summary.completed.reduce((acc, r) => acc + r.response_ms, 0) / summary.completed.length
        : 0;
    const worstFlash = summary.completed.reduce(
      (acc, r) => Math.max(acc, Math.abs(r.flash_deviation_ms)),
      0,
    );
    box.innerHTML =
      `<h2>Session complete</h2>` +
      `<p>${summary.completed.length} responses recorded` +
      (summary.abandoned.length ? `, ${summary.abandoned.length} abandoned` : '') +
      `.</p>` +
      `<p>Mean response time ${mean.toFixed(0)} ms; ` +
      `largest flash deviation ${worstFlash.toFixed(1)} ms.</p>`;
    this.stage.append(box);
    this.status.textContent = '';
  }

  showError(message: string): void {
    this.status.textContent = message;
  }
}

/** Bind digit hotkeys (3..8 and beyond) to choice submission. */
export function bindKeyboard(
  target: Pick<Document, 'addEventListener'>,
  submit: (label: number) => void,
): void {
  target.addEventListener('keydown', (event) => {
    const key = (event as KeyboardEvent).key;
    if (/^[0-9]$/.test(key)) {
      submit(Number(key));
    }
  });
}
