import { describe, expect, it } from 'vitest';

import type { AvpPayload, VjSeries } from '../src/api.js';
import { renderAvpChart, renderVjPlot } from '../src/charts.js';

const SERIES: VjSeries = {
  params_ref: { method: 'approximate' },
  entries: [
    { j: 1, v_sq: 120.25, fitted: 80.5 },
    { j: 2, v_sq: 30.125, fitted: 60.75 },
    { j: 3, v_sq: 10.0625, fitted: 40.25 },
  ],
};

const AVP: AvpPayload = {
  domain: 'spectral',
  covariate_name: 'elev',
  slope: -3.17,
  se: 0.41,
  p_value: 1e-10,
  points: Array.from({ length: 120 }, (_, k) => ({
    id: k + 1,
    x: Math.sin(k),
    y: -3.17 * Math.sin(k) + Math.cos(k),
    cook: Math.abs(Math.cos(k)) / (k + 1),
  })),
};

describe('renderVjPlot', () => {
  it('draws one numbered glyph per entry plus the fitted curve', () => {
    const svg = renderVjPlot(SERIES);
    const glyphs = svg.querySelectorAll('text[data-j]');
    expect(glyphs).toHaveLength(3);
    // first child is the glyph text node; the <title> hover readout follows
    expect(glyphs[0]?.firstChild?.textContent).toBe('1');
    expect(svg.querySelector('polyline[data-role="fitted-curve"]')).not.toBeNull();
  });

  it('keeps the payload values on the glyph for hover readout', () => {
    const svg = renderVjPlot(SERIES);
    const glyph = svg.querySelector('text[data-j="1"]')!;
    expect(glyph.getAttribute('data-vsq')).toBe('120.25');
    expect(glyph.getAttribute('data-fitted')).toBe('80.5');
    expect(glyph.querySelector('title')?.textContent).toContain('v_sq=120.25');
  });

  it('click flags the frequency index', () => {
    let flagged = -1;
    const svg = renderVjPlot(SERIES, 640, 400, { onFlag: (j) => (flagged = j) });
    (svg.querySelector('text[data-j="2"]') as SVGTextElement).dispatchEvent(
      new MouseEvent('click'),
    );
    expect(flagged).toBe(2);
  });
});

describe('renderAvpChart', () => {
  it('spectral domain uses j glyphs with band colors', () => {
    const svg = renderAvpChart(AVP);
    const glyphs = svg.querySelectorAll('text[data-id]');
    expect(glyphs).toHaveLength(120);
    const j101 = svg.querySelector('text[data-id="101"]');
    expect(j101?.getAttribute('fill')).toBe('#cc0000'); // second index band
    expect(svg.querySelector('line[data-role="origin-line"]')).not.toBeNull();
  });

  it('rings the five most influential points', () => {
    const svg = renderAvpChart(AVP);
    expect(svg.querySelectorAll('circle[data-role="cook-ring"]')).toHaveLength(5);
  });

  it('observation domain falls back to circles', () => {
    const svg = renderAvpChart({ ...AVP, domain: 'observation' });
    expect(svg.querySelectorAll('text[data-id]')).toHaveLength(0);
    const dots = svg.querySelectorAll('circle[data-id]:not([data-role="cook-ring"])');
    expect(dots).toHaveLength(120);
  });
});
