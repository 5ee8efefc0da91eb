import { describe, expect, it } from 'vitest';

import type { AvpPayload, FitRecord, SessionView } from '../src/api.js';
import {
  designChips,
  displayNumber,
  fitCard,
  galleryRows,
  orderByP,
  timeline,
  topCookIds,
} from '../src/state.js';

// recorded service payloads (shape-true snapshots)
const FIT: FitRecord = {
  method: 'approximate',
  nu: 0.5,
  params: { sigma_s2: 2.3912038157, sigma_e2: 4.902281, rho: 13.5074421 },
  objective: -412.0912837,
  beta: [{ name: 'intercept', estimate: 0.1234, se: 0.2, p: 0.54 }],
  v_sq: [12.1, 3.4, 0.9],
  converged: true,
  n_starts: 9,
  design: [],
  seed: 3,
};

const VIEW: SessionView = {
  id: 'abc123',
  n: 64,
  grid: [8, 8],
  design: ['elev'],
  candidates: ['slope', 'tc1'],
  fit_count: 1,
  latest_fit: FIT,
  fit_in_progress: false,
};

function avp(name: string, p: number): AvpPayload {
  return {
    domain: 'spectral',
    covariate_name: name,
    slope: -3.17,
    se: 0.4,
    p_value: p,
    points: [
      { id: 1, x: 1, y: 2, cook: 0.5 },
      { id: 2, x: 2, y: 4, cook: 0.1 },
      { id: 3, x: 3, y: 5, cook: 0.9 },
      { id: 4, x: 0.5, y: 1, cook: 0.2 },
      { id: 5, x: 0.1, y: 0.3, cook: 0.05 },
      { id: 6, x: 0.2, y: 0.1, cook: 0.6 },
    ],
  };
}

describe('displayNumber', () => {
  it('renders JSON numbers exactly, no rounding', () => {
    expect(displayNumber(2.3912038157)).toBe('2.3912038157');
    expect(displayNumber(1e-15)).toBe(String(1e-15));
    expect(displayNumber(null)).toBe('--');
  });
});

describe('fitCard', () => {
  it('shows the service values verbatim', () => {
    const rows = new Map(fitCard(FIT));
    expect(rows.get('sigma_s2')).toBe('2.3912038157');
    expect(rows.get('sigma_e2')).toBe('4.902281');
    expect(rows.get('rho')).toBe('13.5074421');
    expect(rows.get('method')).toBe('approximate');
  });

  it('is empty with no fit', () => {
    expect(fitCard(null)).toEqual([]);
  });
});

describe('designChips', () => {
  it('always leads with the intercept', () => {
    expect(designChips(VIEW)).toEqual(['intercept', 'elev']);
  });
});

describe('gallery', () => {
  it('marks in-model candidates and keeps them listed', () => {
    const payloads = new Map([['slope', avp('slope', 0.03)]]);
    const rows = galleryRows(VIEW, payloads);
    expect(rows.map((r) => r.name)).toEqual(['elev', 'slope', 'tc1']);
    expect(rows.find((r) => r.name === 'elev')?.inModel).toBe(true);
    expect(rows.find((r) => r.name === 'slope')?.payload?.p_value).toBe(0.03);
  });

  it('orders loaded candidates by ascending p and pushes in-model last', () => {
    const payloads = new Map([
      ['slope', avp('slope', 0.03)],
      ['tc1', avp('tc1', 1e-9)],
    ]);
    const ordered = orderByP(galleryRows(VIEW, payloads));
    expect(ordered.map((r) => r.name)).toEqual(['tc1', 'slope', 'elev']);
  });
});

describe('timeline', () => {
  it('one step per fit with exact parameter strings', () => {
    const steps = timeline([FIT, { ...FIT, design: ['elev'] }]);
    expect(steps).toHaveLength(2);
    expect(steps[1]?.design).toEqual(['elev']);
    expect(steps[0]?.params).toEqual(['2.3912038157', '4.902281', '13.5074421']);
  });
});

describe('topCookIds', () => {
  it('returns the five most influential point ids', () => {
    expect(topCookIds(avp('x', 0.5))).toEqual([3, 6, 1, 4, 2]);
  });
});
