import { describe, expect, it } from 'vitest';

import {
  checkMonotone,
  cloneTable,
  DEFAULT_TABLE,
  exportProfiles,
  predictedPassRate,
  withFieldValue,
} from '../src/thresholds.js';
import type { Histogram } from '../src/types.js';

const uniform: Histogram = {
  bin_edges: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
  counts: [10, 10, 10, 10, 10, 10, 10, 10, 10, 10],
};

describe('predictedPassRate', () => {
  it('marker at the histogram minimum passes everything', () => {
    expect(predictedPassRate(uniform, 0, 'min_bpp')).toBe(1);
  });

  it('marker at the maximum passes nothing for a min field', () => {
    expect(predictedPassRate(uniform, 10, 'min_bpp')).toBe(0);
  });

  it('splits uniform mass proportionally', () => {
    expect(predictedPassRate(uniform, 5, 'min_bpp')).toBeCloseTo(0.5, 10);
    expect(predictedPassRate(uniform, 2.5, 'min_bpp')).toBeCloseTo(0.75, 10);
  });

  it('max fields pass the mass below the cutoff', () => {
    expect(predictedPassRate(uniform, 10, 'max_watermark_score')).toBe(1);
    expect(predictedPassRate(uniform, 0, 'max_watermark_score')).toBe(0);
    expect(predictedPassRate(uniform, 7.5, 'max_watermark_score')).toBeCloseTo(0.75, 10);
  });

  it('agrees with exact rates within one bin of mass', () => {
    const skewed: Histogram = { bin_edges: [0, 1, 2, 3], counts: [70, 20, 10] };
    const oneBin = 70 / 100;
    const predicted = predictedPassRate(skewed, 0.9, 'min_bpp');
    const exactIfAllAtEdges = 30 / 100;
    expect(Math.abs(predicted - exactIfAllAtEdges)).toBeLessThanOrEqual(oneBin);
  });

  it('empty histogram predicts full pass', () => {
    expect(predictedPassRate({ bin_edges: [], counts: [] }, 3, 'min_bpp')).toBe(1);
  });
});

describe('checkMonotone', () => {
  it('default table is monotone', () => {
    expect(checkMonotone(DEFAULT_TABLE)).toEqual([]);
  });

  it('flags an SFT marker looser than CT', () => {
    const broken = withFieldValue(cloneTable(DEFAULT_TABLE), 'SFT', 'min_bpp', 0.1);
    const issues = checkMonotone(broken);
    expect(issues).toHaveLength(1);
    expect(issues[0].field).toBe('min_bpp');
    expect(issues[0].later).toBe('SFT');
  });

  it('flags a max field raised above the earlier stage', () => {
    const broken = withFieldValue(cloneTable(DEFAULT_TABLE), 'CT', 'max_greasy_score', 0.99);
    expect(checkMonotone(broken).length).toBeGreaterThan(0);
  });
});

describe('exportProfiles', () => {
  it('produces the stage-keyed JSON the CLI accepts', () => {
    const parsed = JSON.parse(exportProfiles(DEFAULT_TABLE));
    expect(Object.keys(parsed)).toEqual(['PT', 'CT', 'SFT']);
    expect(parsed.CT.min_bpp).toBe(0.5);
    expect(Object.keys(parsed.PT)).toEqual([...Object.keys(parsed.PT)].sort());
  });

  it('refuses to export a non-monotone table', () => {
    const broken = withFieldValue(cloneTable(DEFAULT_TABLE), 'SFT', 'min_edge_variance', 1);
    expect(() => exportProfiles(broken)).toThrow(/looser/);
  });

  it('withFieldValue leaves the source table untouched', () => {
    const base = cloneTable(DEFAULT_TABLE);
    withFieldValue(base, 'CT', 'min_bpp', 9);
    expect(base.CT.min_bpp).toBe(0.5);
  });
});
