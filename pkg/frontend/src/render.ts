/** DOM rendering for the result grid and threshold panels. */

import type { CurationApi } from './api.js';
import type { SearchController } from './search.js';
import type { Histogram, Stage, ThresholdField } from './types.js';
import { FIELD_OPERATOR, STAGES, THRESHOLD_FIELDS } from './types.js';
import { checkMonotone, isMinField, predictedPassRate, ProfileTable } from './thresholds.js';

export function renderGrid(
  container: HTMLElement,
  controller: SearchController,
  api: CurationApi,
  onToggle: () => void,
): void {
  container.replaceChildren();
  if (controller.grid.empty) {
    const empty = document.createElement('p');
    empty.className = 'empty-state';
    empty.textContent = 'No results for this query.';
    container.appendChild(empty);
    return;
  }
  for (const entry of controller.grid.entries) {
    const card = document.createElement('figure');
    card.className = 'result-card';

    const img = document.createElement('img');
    img.loading = 'lazy';
    img.src = api.thumbnailUrl(entry.record_id);
    img.alt = entry.record_id;
    card.appendChild(img);

    const caption = document.createElement('figcaption');
    const sim = entry.similarity.toFixed(3);
    const badge = entry.cluster_id === null ? '' : ` · c${entry.cluster_id}`;
    caption.textContent = `${entry.record_id} · ${sim}${badge}`;
    card.appendChild(caption);

    const controls = document.createElement('div');
    controls.className = 'toggles';
    for (const label of ['POSITIVE', 'NEGATIVE'] as const) {
      const button = document.createElement('button');
      button.textContent = label === 'POSITIVE' ? '+' : '−';
      button.className = controller.labels.get(entry.record_id) === label ? 'active' : '';
      button.addEventListener('click', () => {
        void controller.toggle(entry.record_id, label);
        onToggle();
      });
      controls.appendChild(button);
    }
    card.appendChild(controls);
    container.appendChild(card);
  }
}

export function renderError(container: HTMLElement, message: string, issues: string[]): void {
  container.replaceChildren();
  const lines = issues.length > 0 ? issues : message ? [message] : [];
  for (const line of lines) {
    const p = document.createElement('p');
    p.className = 'error';
    p.textContent = line;
    container.appendChild(p);
  }
}

interface HistPanelState {
  table: ProfileTable;
  stage: Stage;
  histograms: Record<string, Histogram>;
}

export function renderThresholdPanel(
  container: HTMLElement,
  state: HistPanelState,
  onDrag: (field: ThresholdField, value: number) => void,
): void {
  container.replaceChildren();
  for (const field of THRESHOLD_FIELDS) {
    const hist = state.histograms[FIELD_OPERATOR[field]];
    if (!hist || hist.bin_edges.length < 2) continue;
    const row = document.createElement('div');
    row.className = 'threshold-row';

    const canvas = document.createElement('canvas');
    canvas.width = 260;
    canvas.height = 60;
    drawHistogram(canvas, hist, state.table[state.stage][field], field);
    row.appendChild(canvas);

    const lo = hist.bin_edges[0];
    const hi = hist.bin_edges[hist.bin_edges.length - 1];
    const slider = document.createElement('input');
    slider.type = 'range';
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = String((hi - lo) / 200 || 1);
    slider.value = String(state.table[state.stage][field]);
    const readout = document.createElement('span');
    const update = () => {
      const value = Number(slider.value);
      const rate = predictedPassRate(hist, value, field);
      readout.textContent = `${field} = ${value.toPrecision(3)} → pass ${(rate * 100).toFixed(1)}%`;
    };
    slider.addEventListener('input', () => {
      update();
      onDrag(field, Number(slider.value));
      drawHistogram(canvas, hist, Number(slider.value), field);
    });
    update();
    row.appendChild(slider);
    row.appendChild(readout);
    container.appendChild(row);
  }

  const issues = checkMonotone(state.table);
  const warning = document.createElement('p');
  warning.className = issues.length > 0 ? 'error' : 'ok';
  warning.textContent =
    issues.length > 0 ? issues.map((i) => i.message).join('; ') : 'stages are monotone';
  container.appendChild(warning);
}

function drawHistogram(
  canvas: HTMLCanvasElement,
  hist: Histogram,
  cutoff: number,
  field: ThresholdField,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const max = Math.max(...hist.counts, 1);
  const lo = hist.bin_edges[0];
  const hi = hist.bin_edges[hist.bin_edges.length - 1];
  const span = hi - lo || 1;
  const barWidth = width / hist.counts.length;
  hist.counts.forEach((count, i) => {
    const left = hist.bin_edges[i];
    const passes = isMinField(field) ? left >= cutoff : hist.bin_edges[i + 1] <= cutoff;
    ctx.fillStyle = passes ? '#4878cf' : '#c9d4e8';
    const barHeight = (count / max) * (height - 4);
    ctx.fillRect(i * barWidth, height - barHeight, barWidth - 1, barHeight);
  });
  const x = ((cutoff - lo) / span) * width;
  ctx.strokeStyle = '#d65f5f';
  ctx.beginPath();
  ctx.moveTo(x, 0);
  ctx.lineTo(x, height);
  ctx.stroke();
}

export function stageSelector(current: Stage, onChange: (stage: Stage) => void): HTMLSelectElement {
  const select = document.createElement('select');
  for (const stage of STAGES) {
    const option = document.createElement('option');
    option.value = stage;
    option.textContent = stage;
    option.selected = stage === current;
    select.appendChild(option);
  }
  select.addEventListener('change', () => onChange(select.value as Stage));
  return select;
}
