/**
 * SVG chart builders.  DOM only; the numbers on screen are the payload
 * values verbatim (scaling happens in coordinates, never in labels).
 */

import type { AvpPayload, VjSeries } from './api.js';
import { displayNumber, topCookIds } from './state.js';

const BAND_COLORS = ['#000000', '#cc0000', '#00aa00', '#0000cc', '#cc00cc'];

const SVG_NS = 'http://www.w3.org/2000/svg';

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
  text?: string,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  if (text !== undefined) node.textContent = text;
  return node;
}

type Scale = (v: number) => number;

function linearScale(values: number[], outLo: number, outHi: number): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (hi <= lo) hi = lo + 1;
  const pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  return (v: number) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

function bandColor(j: number): string {
  const band = Math.min(Math.floor((j - 1) / 100), BAND_COLORS.length - 1);
  return BAND_COLORS[band] ?? '#000000';
}

export type VjPlotHooks = {
  onFlag?: (j: number) => void;
};

/**
 * v_j^2 scatter with the index number as glyph and the fitted curve
 * overlaid; clicking a glyph flags that j (pre-fills the gallery focus).
 */
export function renderVjPlot(
  series: VjSeries,
  width = 640,
  height = 400,
  hooks: VjPlotHooks = {},
): SVGSVGElement {
  const svg = el('svg', {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    'data-chart': 'vj',
  });
  const entries = series.entries;
  if (entries.length === 0) {
    svg.appendChild(el('text', { x: width / 2, y: height / 2, 'text-anchor': 'middle' },
      'no spectral projections yet'));
    return svg;
  }
  const xs = linearScale(entries.map((e) => e.j), 40, width - 10);
  const ys = linearScale(
    entries.flatMap((e) => [e.v_sq, e.fitted]),
    height - 30,
    20,
  );
  const curve = entries
    .map((e) => `${xs(e.j)},${ys(e.fitted)}`)
    .join(' ');
  svg.appendChild(el('polyline', {
    points: curve,
    fill: 'none',
    stroke: '#cc0000',
    'stroke-width': 1.5,
    'data-role': 'fitted-curve',
  }));
  for (const e of entries) {
    const glyph = el(
      'text',
      {
        x: xs(e.j),
        y: ys(e.v_sq),
        'text-anchor': 'middle',
        'font-size': 9,
        fill: bandColor(e.j),
        cursor: 'pointer',
        'data-j': e.j,
        'data-vsq': e.v_sq,
        'data-fitted': e.fitted,
      },
      String(e.j),
    );
    const title = el('title', {});
    title.textContent = `j=${e.j} v_sq=${displayNumber(e.v_sq)} fitted=${displayNumber(e.fitted)}`;
    glyph.appendChild(title);
    glyph.addEventListener('click', () => hooks.onFlag?.(e.j));
    svg.appendChild(glyph);
  }
  return svg;
}

/** AVP scatter with the through-origin line; spectral points use the j
 * glyph and band colors, top-Cook points get a highlight ring. */
export function renderAvpChart(
  payload: AvpPayload,
  width = 420,
  height = 320,
): SVGSVGElement {
  const svg = el('svg', {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    'data-chart': 'avp',
    'data-domain': payload.domain,
    'data-candidate': payload.covariate_name,
  });
  const pts = payload.points;
  const xs = linearScale(pts.map((p) => p.x), 36, width - 8);
  const ys = linearScale(pts.map((p) => p.y), height - 24, 16);
  const xLo = Math.min(...pts.map((p) => p.x));
  const xHi = Math.max(...pts.map((p) => p.x));
  svg.appendChild(el('line', {
    x1: xs(xLo),
    y1: ys(payload.slope * xLo),
    x2: xs(xHi),
    y2: ys(payload.slope * xHi),
    stroke: '#cc0000',
    'stroke-width': 1.5,
    'data-role': 'origin-line',
  }));
  const highlight = new Set(topCookIds(payload));
  for (const p of pts) {
    if (highlight.has(p.id)) {
      svg.appendChild(el('circle', {
        cx: xs(p.x),
        cy: ys(p.y),
        r: 7,
        fill: 'none',
        stroke: '#ff9900',
        'data-role': 'cook-ring',
        'data-id': p.id,
      }));
    }
    if (payload.domain === 'spectral') {
      svg.appendChild(el(
        'text',
        {
          x: xs(p.x),
          y: ys(p.y),
          'text-anchor': 'middle',
          'font-size': 8,
          fill: bandColor(p.id),
          'data-id': p.id,
        },
        String(p.id),
      ));
    } else {
      svg.appendChild(el('circle', {
        cx: xs(p.x),
        cy: ys(p.y),
        r: 2,
        fill: 'none',
        stroke: '#000000',
        'data-id': p.id,
      }));
    }
  }
  return svg;
}
