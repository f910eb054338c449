import { HttpTrialApi } from './api.js';
import { TrialRunner } from './runner.js';
import { BrowserFrameClock } from './timing.js';
import { DomView, bindKeyboard } from './ui.js';

function intValue(input: HTMLInputElement, fallback: number): number {
  const parsed = Number.parseInt(input.value, 10);
  return Number.isFinite(parsed) ? parsed : fallback;
}

function setup(): void {
  const form = document.getElementById('setup') as HTMLFormElement;
  const exposureSelect = document.getElementById('exposure') as HTMLSelectElement;
  const lengthInput = document.getElementById('length') as HTMLInputElement;
  const seedInput = document.getElementById('seed') as HTMLInputElement;
  const root = document.getElementById('trial-root') as HTMLElement;

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    form.hidden = true;
    const api = new HttpTrialApi('');
    const view = new DomView(root);
    const runner = new TrialRunner(api, new BrowserFrameClock(), view);
    bindKeyboard(document, (label) => runner.submitChoice(label));
    const length = intValue(lengthInput, 20);
    runner
      .runSession({
        exposure_ms: Number(exposureSelect.value),
        filter: length > 0 ? { length } : {},
        seed: intValue(seedInput, 0),
      })
      .catch(() => {
        form.hidden = false;
      });
  });
}

setup();
