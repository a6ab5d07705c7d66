/** Threshold tuning: live pass-rate prediction over operator histograms,
 * stage monotonicity checks, and profile export in the exact JSON shape
 * the CLI accepts via --threshold-profile. */

import {
  Histogram,
  ProfileTable,
  Stage,
  STAGES,
  THRESHOLD_FIELDS,
  ThresholdField,
  ThresholdProfile,
} from './types.js';

/** Fields where a larger value is stricter (cut everything below). */
const MIN_FIELDS: ThresholdField[] = [
  'min_compression_ratio',
  'min_edge_variance',
  'min_bpp',
  'min_ai_score',
];

export function isMinField(field: ThresholdField): boolean {
  return MIN_FIELDS.includes(field);
}

/**
 * Fraction of histogram mass on the passing side of a cutoff.
 *
 * Whole bins count fully; the bin straddling the cutoff contributes
 * linearly, so the prediction agrees with the true rate to within one bin.
 */
export function predictedPassRate(hist: Histogram, cutoff: number, field: ThresholdField): number {
  const { bin_edges: edges, counts } = hist;
  const total = counts.reduce((a, b) => a + b, 0);
  if (total === 0 || edges.length < 2) {
    return 1;
  }
  let passing = 0;
  for (let i = 0; i < counts.length; i++) {
    const left = edges[i];
    const right = edges[i + 1];
    const width = right - left;
    let fractionAbove: number;
    if (cutoff <= left) {
      fractionAbove = 1;
    } else if (cutoff >= right) {
      fractionAbove = 0;
    } else {
      fractionAbove = width > 0 ? (right - cutoff) / width : 0;
    }
    const fractionPassing = isMinField(field) ? fractionAbove : 1 - fractionAbove;
    passing += counts[i] * fractionPassing;
  }
  return passing / total;
}

export interface MonotonicityIssue {
  field: ThresholdField;
  earlier: Stage;
  later: Stage;
  message: string;
}

/** A later stage must be at least as strict as the one before, field-wise. */
export function checkMonotone(table: ProfileTable): MonotonicityIssue[] {
  const issues: MonotonicityIssue[] = [];
  for (let i = 1; i < STAGES.length; i++) {
    const earlier = STAGES[i - 1];
    const later = STAGES[i];
    for (const field of THRESHOLD_FIELDS) {
      const a = table[earlier][field];
      const b = table[later][field];
      const strict = isMinField(field) ? b >= a : b <= a;
      if (!strict) {
        issues.push({
          field,
          earlier,
          later,
          message: `${later} ${field} (${b}) is looser than ${earlier} (${a})`,
        });
      }
    }
  }
  return issues;
}

/** Serialize a profile table exactly as the CLI expects; throws when the
 * table is non-monotone so a broken export can never be produced. */
export function exportProfiles(table: ProfileTable): string {
  const issues = checkMonotone(table);
  if (issues.length > 0) {
    throw new Error(`cannot export: ${issues.map((i) => i.message).join('; ')}`);
  }
  const ordered: Record<string, Record<string, number>> = {};
  for (const stage of STAGES) {
    const body: Record<string, number> = {};
    for (const field of [...THRESHOLD_FIELDS].sort()) {
      body[field] = table[stage][field];
    }
    ordered[stage] = body;
  }
  return JSON.stringify(ordered, null, 2) + '\n';
}

export function cloneTable(table: ProfileTable): ProfileTable {
  return {
    PT: { ...table.PT },
    CT: { ...table.CT },
    SFT: { ...table.SFT },
  };
}

/** Apply one marker drag; the caller re-renders pass rates afterwards. */
export function withFieldValue(
  table: ProfileTable,
  stage: Stage,
  field: ThresholdField,
  value: number,
): ProfileTable {
  const next = cloneTable(table);
  next[stage][field] = value;
  return next;
}

export const DEFAULT_TABLE: ProfileTable = {
  PT: {
    min_compression_ratio: 0.02,
    min_edge_variance: 10,
    min_bpp: 0.2,
    min_ai_score: 0.05,
    max_watermark_score: 0.98,
    max_greasy_score: 0.98,
  },
  CT: {
    min_compression_ratio: 0.05,
    min_edge_variance: 50,
    min_bpp: 0.5,
    min_ai_score: 0.2,
    max_watermark_score: 0.9,
    max_greasy_score: 0.9,
  },
  SFT: {
    min_compression_ratio: 0.08,
    min_edge_variance: 100,
    min_bpp: 1.0,
    min_ai_score: 0.4,
    max_watermark_score: 0.8,
    max_greasy_score: 0.8,
  },
};

export type { ThresholdProfile, ProfileTable };
