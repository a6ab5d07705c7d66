/** Wire types for the curation service HTTP API. Field names match the
 * server's serialized forms exactly. */

export type SearchMode = 'image' | 'multi' | 'text' | 'hybrid' | 'batch';

export type AnnotationLabel = 'POSITIVE' | 'NEGATIVE';

export interface SearchRequest {
  session_id: string;
  mode: SearchMode;
  seed_record_ids: string[];
  seed_blobs_b64: string[];
  text: string;
  alpha: number;
  k: number;
  diversity_clusters: number;
}

export interface ResultEntry {
  record_id: string;
  similarity: number;
  cluster_id: number | null;
}

export interface SearchResponse {
  session_id: string;
  query_id: string;
  exact: boolean;
  results: ResultEntry[];
}

export interface AnnotationRequest {
  session_id: string;
  query_id: string;
  record_id: string;
  label: AnnotationLabel;
}

export interface RefineResponse extends SearchResponse {
  query_vector: number[];
  excluded: string[];
}

export interface Histogram {
  bin_edges: number[];
  counts: number[];
}

export interface StatsResponse {
  stage: string;
  total: number;
  passed: number;
  failed: number;
  histograms: Record<string, Histogram>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export type Stage = 'PT' | 'CT' | 'SFT';

export const STAGES: Stage[] = ['PT', 'CT', 'SFT'];

/** One stage's operator cutoffs; field names match the CLI profile schema. */
export interface ThresholdProfile {
  min_compression_ratio: number;
  min_edge_variance: number;
  min_bpp: number;
  min_ai_score: number;
  max_watermark_score: number;
  max_greasy_score: number;
}

export type ProfileTable = Record<Stage, ThresholdProfile>;

export type ThresholdField = keyof ThresholdProfile;

export const THRESHOLD_FIELDS: ThresholdField[] = [
  'min_compression_ratio',
  'min_edge_variance',
  'min_bpp',
  'min_ai_score',
  'max_watermark_score',
  'max_greasy_score',
];

/** Operator histogram key served by /v1/stats for each threshold field. */
export const FIELD_OPERATOR: Record<ThresholdField, string> = {
  min_compression_ratio: 'compression_ratio',
  min_edge_variance: 'edge_variance',
  min_bpp: 'bpp',
  min_ai_score: 'ai_score',
  max_watermark_score: 'watermark_score',
  max_greasy_score: 'greasy_score',
};
