/** Page wiring: form inputs, search grid, threshold tuner, profile export. */

import { CurationApi } from './api.js';
import { renderError, renderGrid, renderThresholdPanel, stageSelector } from './render.js';
import { SearchController } from './search.js';
import {
  checkMonotone,
  cloneTable,
  DEFAULT_TABLE,
  exportProfiles,
  withFieldValue,
} from './thresholds.js';
import type { SearchMode, Stage, StatsResponse } from './types.js';
import { emptyForm, SearchForm } from './validate.js';

const api = new CurationApi(
  (document.querySelector('meta[name="service-base"]') as HTMLMetaElement | null)?.content ??
    'http://127.0.0.1:8000',
);
const controller = new SearchController(api, `console-${Date.now().toString(36)}`);

const form: SearchForm = emptyForm();
const uploads: string[] = [];

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function readForm(): SearchForm {
  form.mode = byId<HTMLSelectElement>('mode').value as SearchMode;
  form.text = byId<HTMLInputElement>('query-text').value;
  form.alpha = Number(byId<HTMLInputElement>('alpha').value);
  form.k = Number(byId<HTMLInputElement>('topk').value);
  form.diversityClusters = Number(byId<HTMLInputElement>('clusters').value);
  form.seedBlobs = [...uploads];
  form.seedRecordIds = controller
    .positives()
    .filter(() => false); // seeds come from uploads; positives feed refine instead
  return form;
}

function redraw(): void {
  renderGrid(byId('grid'), controller, api, redraw);
  renderError(byId('messages'), controller.errorMessage, controller.validationIssues);
  byId<HTMLButtonElement>('refine').disabled = controller.positives().length === 0;
}

byId<HTMLInputElement>('seed-files').addEventListener('change', async (event) => {
  uploads.length = 0;
  const files = (event.target as HTMLInputElement).files ?? new FileList();
  for (const file of Array.from(files)) {
    const buf = new Uint8Array(await file.arrayBuffer());
    let bin = '';
    buf.forEach((b) => (bin += String.fromCharCode(b)));
    uploads.push(btoa(bin));
  }
});

byId<HTMLButtonElement>('search').addEventListener('click', async () => {
  await controller.submitSearch(readForm());
  redraw();
});

byId<HTMLButtonElement>('refine').addEventListener('click', async () => {
  await controller.refine(form.k);
  redraw();
});

// --- threshold tuner ---

let table = cloneTable(DEFAULT_TABLE);
let stage: Stage = 'CT';
let stats: StatsResponse | null = null;

function redrawThresholds(): void {
  if (!stats) return;
  renderThresholdPanel(
    byId('thresholds'),
    { table, stage, histograms: stats.histograms },
    (field, value) => {
      table = withFieldValue(table, stage, field, value);
    },
  );
}

byId('stage-slot').appendChild(
  stageSelector(stage, (next) => {
    stage = next;
    redrawThresholds();
  }),
);

byId<HTMLButtonElement>('load-stats').addEventListener('click', async () => {
  try {
    stats = await api.stats();
    byId('threshold-messages').textContent = `stats from stage ${stats.stage}`;
    redrawThresholds();
  } catch (err) {
    byId('threshold-messages').textContent = err instanceof Error ? err.message : String(err);
  }
});

byId<HTMLButtonElement>('export').addEventListener('click', () => {
  const issues = checkMonotone(table);
  if (issues.length > 0) {
    byId('threshold-messages').textContent = issues.map((i) => i.message).join('; ');
    return;
  }
  const blob = new Blob([exportProfiles(table)], { type: 'application/json' });
  const link = document.createElement('a');
  link.href = URL.createObjectURL(blob);
  link.download = 'threshold-profile.json';
  link.click();
  URL.revokeObjectURL(link.href);
});

redraw();
