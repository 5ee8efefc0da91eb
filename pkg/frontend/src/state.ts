/**
 * Pure view-state derivation.  All fields come straight from service
 * payloads; the only client-side work is picking and arranging them.
 */

import type { AvpPayload, FitRecord, SessionView } from './api.js';

export type Step = { label: string; design: string[]; params?: string[] };

export type GalleryEntry = {
  name: string;
  inModel: boolean;
  payload: AvpPayload | null;
};

/** Exact-text rendering of a JSON number (no rounding, no locale). */
export function displayNumber(x: number | null | undefined): string {
  if (x === null || x === undefined) return '--';
  return String(x);
}

export function fitCard(fit: FitRecord | null): Array<[string, string]> {
  if (!fit) return [];
  return [
    ['method', fit.method],
    ['sigma_s2', displayNumber(fit.params.sigma_s2)],
    ['sigma_e2', displayNumber(fit.params.sigma_e2)],
    ['rho', displayNumber(fit.params.rho)],
    ['objective', displayNumber(fit.objective)],
    ['converged', String(fit.converged)],
  ];
}

export function designChips(view: SessionView): string[] {
  return ['intercept', ...view.design];
}

/** Gallery rows: in-model candidates stay listed but greyed to "--". */
export function galleryRows(
  view: SessionView,
  payloads: Map<string, AvpPayload>,
): GalleryEntry[] {
  const names = [...view.design, ...view.candidates];
  const unique = names.filter((n, i) => names.indexOf(n) === i);
  return unique.map((name) => ({
    name,
    inModel: view.design.includes(name),
    payload: payloads.get(name) ?? null,
  }));
}

/** Candidates ordered by ascending slope p-value, unknowns last. */
export function orderByP(entries: GalleryEntry[]): GalleryEntry[] {
  return [...entries].sort((a, b) => {
    if (a.inModel !== b.inModel) return a.inModel ? 1 : -1;
    const pa = a.payload ? a.payload.p_value : Number.POSITIVE_INFINITY;
    const pb = b.payload ? b.payload.p_value : Number.POSITIVE_INFINITY;
    return pa - pb;
  });
}

export function timeline(history: FitRecord[]): Step[] {
  return history.map((fit, i) => ({
    label: `fit ${i + 1}: ${fit.method}`,
    design: fit.design ?? [],
    params: [
      displayNumber(fit.params.sigma_s2),
      displayNumber(fit.params.sigma_e2),
      displayNumber(fit.params.rho),
    ],
  }));
}

/** Indices of a payload's five most influential points (for badges). */
export function topCookIds(payload: AvpPayload, k = 5): number[] {
  return [...payload.points]
    .sort((a, b) => b.cook - a.cook)
    .slice(0, k)
    .map((p) => p.id);
}
