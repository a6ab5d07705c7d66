/** Thin HTTP client for the curation service. No business logic lives
 * here: requests go out exactly as composed by the caller. */

import type {
  AnnotationRequest,
  ApiErrorBody,
  RefineResponse,
  SearchRequest,
  SearchResponse,
  StatsResponse,
} from './types.js';

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class CurationApi {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const err = payload as Partial<ApiErrorBody>;
      throw new ApiError(response.status, {
        code: err.code ?? 'UnknownError',
        message: err.message ?? `HTTP ${response.status}`,
      });
    }
    return payload as T;
  }

  search(req: SearchRequest): Promise<SearchResponse> {
    return this.request<SearchResponse>('POST', '/v1/search', req);
  }

  annotate(req: AnnotationRequest): Promise<void> {
    return this.request<void>('POST', '/v1/annotations', req);
  }

  refine(sessionId: string, k: number): Promise<RefineResponse> {
    return this.request<RefineResponse>(
      'POST',
      `/v1/sessions/${encodeURIComponent(sessionId)}/refine`,
      { k },
    );
  }

  stats(): Promise<StatsResponse> {
    return this.request<StatsResponse>('GET', '/v1/stats');
  }

  /** Thumbnails load lazily through plain <img> tags pointing here. */
  thumbnailUrl(recordId: string): string {
    return `${this.baseUrl}/v1/records/${recordId}/thumbnail`;
  }
}
