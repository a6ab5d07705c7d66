/** Controller for the retrieve -> annotate -> refine loop.
 *
 * Holds the grid state and guarantees two invariants: no request leaves
 * this controller if client-side validation rejects the form, and at most
 * one search is in flight per session. Annotation posts are
 * fire-and-forget with one retry.
 */

import type { CurationApi } from './api.js';
import type { AnnotationLabel, ResultEntry } from './types.js';
import { SearchForm, toSearchRequest, validateSearchForm } from './validate.js';

const ANNOTATION_RETRY_DELAY_MS = 250;

export interface GridState {
  entries: ResultEntry[];
  queryId: string;
  empty: boolean;
  fromRefine: boolean;
}

export class SearchController {
  readonly sessionId: string;
  private readonly api: CurationApi;

  grid: GridState = { entries: [], queryId: '', empty: false, fromRefine: false };
  labels = new Map<string, AnnotationLabel>();
  errorMessage = '';
  validationIssues: string[] = [];
  private inFlight = false;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(api: CurationApi, sessionId: string, sleep?: (ms: number) => Promise<void>) {
    this.api = api;
    this.sessionId = sessionId;
    this.sleep = sleep ?? ((ms) => new Promise((resolve) => setTimeout(resolve, ms)));
  }

  get busy(): boolean {
    return this.inFlight;
  }

  /** Submit the form; returns true when a grid was rendered. */
  async submitSearch(form: SearchForm): Promise<boolean> {
    this.validationIssues = validateSearchForm(form);
    if (this.validationIssues.length > 0) {
      return false; // blocked client-side; nothing reaches the server
    }
    if (this.inFlight) {
      return false;
    }
    this.inFlight = true;
    try {
      const response = await this.api.search(toSearchRequest(form, this.sessionId));
      this.grid = {
        entries: response.results,
        queryId: response.query_id,
        empty: response.results.length === 0,
        fromRefine: false,
      };
      this.labels.clear();
      this.errorMessage = '';
      return true;
    } catch (err) {
      this.errorMessage = err instanceof Error ? err.message : String(err);
      return false; // form state untouched, caller re-renders inline error
    } finally {
      this.inFlight = false;
    }
  }

  /** Toggle one result's label; posting happens in the background. */
  toggle(recordId: string, label: AnnotationLabel): Promise<void> {
    if (!this.grid.queryId) {
      return Promise.resolve();
    }
    const current = this.labels.get(recordId);
    if (current === label) {
      this.labels.delete(recordId);
      return Promise.resolve(); // local clear; the server keeps the last label
    }
    this.labels.set(recordId, label);
    const payload = {
      session_id: this.sessionId,
      query_id: this.grid.queryId,
      record_id: recordId,
      label,
    };
    return this.api.annotate(payload).catch(async () => {
      await this.sleep(ANNOTATION_RETRY_DELAY_MS);
      await this.api.annotate(payload).catch(() => {
        // dropped after one retry; the next annotation or refine resyncs
      });
    });
  }

  positives(): string[] {
    return [...this.labels.entries()].filter(([, l]) => l === 'POSITIVE').map(([r]) => r);
  }

  negatives(): string[] {
    return [...this.labels.entries()].filter(([, l]) => l === 'NEGATIVE').map(([r]) => r);
  }

  /** Run the next retrieval iteration from the accumulated positives. */
  async refine(k: number): Promise<boolean> {
    if (this.inFlight) {
      return false;
    }
    if (this.positives().length === 0) {
      this.errorMessage = 'mark at least one positive before refining';
      return false;
    }
    this.inFlight = true;
    try {
      const response = await this.api.refine(this.sessionId, k);
      this.grid = {
        entries: response.results,
        queryId: response.query_id,
        empty: response.results.length === 0,
        fromRefine: true,
      };
      this.errorMessage = '';
      return true;
    } catch (err) {
      this.errorMessage = err instanceof Error ? err.message : String(err);
      return false;
    } finally {
      this.inFlight = false;
    }
  }
}
