/** Client-side form validation mirroring the server's query preconditions.
 * A form that produces any issue here is never submitted. */

import type { SearchMode, SearchRequest } from './types.js';

export interface SearchForm {
  mode: SearchMode;
  /** Record ids of seeds picked from a previous result grid. */
  seedRecordIds: string[];
  /** Base64 payloads of uploaded seed images. */
  seedBlobs: string[];
  text: string;
  alpha: number;
  k: number;
  diversityClusters: number;
}

export function emptyForm(): SearchForm {
  return {
    mode: 'image',
    seedRecordIds: [],
    seedBlobs: [],
    text: '',
    alpha: 0.5,
    k: 12,
    diversityClusters: 0,
  };
}

function imageSeedCount(form: SearchForm): number {
  return form.seedRecordIds.length + form.seedBlobs.length;
}

/** Issues preventing submission; empty array means the form is valid. */
export function validateSearchForm(form: SearchForm): string[] {
  const issues: string[] = [];
  const seeds = imageSeedCount(form);
  const hasText = form.text.trim().length > 0;

  switch (form.mode) {
    case 'image':
      if (seeds !== 1) issues.push('image mode needs exactly one seed image');
      if (hasText) issues.push('image mode takes no text');
      break;
    case 'multi':
      if (seeds < 2) issues.push('multi-image mode needs at least two seed images');
      if (hasText) issues.push('multi-image mode takes no text');
      break;
    case 'text':
      if (!hasText) issues.push('text mode needs query text');
      if (seeds !== 0) issues.push('text mode takes no seed images');
      break;
    case 'hybrid':
      if (seeds !== 1) issues.push('hybrid mode needs exactly one seed image');
      if (!hasText) issues.push('hybrid mode needs query text');
      break;
    case 'batch':
      if (seeds < 1) issues.push('batch mode needs at least one seed image');
      if (hasText) issues.push('batch mode takes no text');
      break;
  }

  if (!Number.isInteger(form.k) || form.k < 1) issues.push('k must be a positive integer');
  if (form.alpha < 0 || form.alpha > 1) issues.push('alpha must lie in [0, 1]');
  if (!Number.isInteger(form.diversityClusters) || form.diversityClusters < 0) {
    issues.push('diversity clusters must be a non-negative integer');
  }
  return issues;
}

export function toSearchRequest(form: SearchForm, sessionId: string): SearchRequest {
  return {
    session_id: sessionId,
    mode: form.mode,
    seed_record_ids: [...form.seedRecordIds],
    seed_blobs_b64: [...form.seedBlobs],
    text: form.text.trim(),
    alpha: form.alpha,
    k: form.k,
    diversity_clusters: form.diversityClusters,
  };
}
