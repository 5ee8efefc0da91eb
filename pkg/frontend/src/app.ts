/**
 * Application shell: upload -> grid -> fit -> inspect -> grow the model.
 *
 * Every state transition is a service round-trip; the client never
 * computes statistics.  Long fits surface the poll state with a cancel
 * button, and the step timeline mirrors the server-side fit history.
 */

import { ApiClient, ServiceError } from './api.js';
import type { AvpPayload, SessionView } from './api.js';
import { renderAvpChart, renderVjPlot } from './charts.js';
import type { VjSeries } from './api.js';
import {
  designChips,
  displayNumber,
  fitCard,
  galleryRows,
  orderByP,
  timeline,
  topCookIds,
} from './state.js';

type AppState = {
  view: SessionView | null;
  domain: 'spectral' | 'observation';
  focusJ: number | null;
  avpPayloads: Map<string, AvpPayload>;
  vjSeries: VjSeries | null;
  fitToken: string | null;
  status: string;
};

function div(className: string, text?: string): HTMLDivElement {
  const node = document.createElement('div');
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void, className = 'btn'): HTMLButtonElement {
  const b = document.createElement('button');
  b.textContent = label;
  b.className = className;
  b.addEventListener('click', onClick);
  return b;
}

function labeledInput(label: string, id: string, value: string): HTMLLabelElement {
  const wrap = document.createElement('label');
  wrap.className = 'field';
  wrap.textContent = label + ' ';
  const input = document.createElement('input');
  input.id = id;
  input.value = value;
  wrap.appendChild(input);
  return wrap;
}

export class App {
  state: AppState = {
    view: null,
    domain: 'spectral',
    focusJ: null,
    avpPayloads: new Map(),
    vjSeries: null,
    fitToken: null,
    status: 'upload a CSV to start',
  };

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private pollDelayMs = 150,
  ) {}

  // ------------------------------------------------------------------
  // actions (each ends in render)
  // ------------------------------------------------------------------

  async createSession(csv: string, locCols: string[], outcome: string, covs: string[]) {
    await this.guard(async () => {
      const schema = { loc: locCols, outcome, covariates: covs };
      this.state.view = await this.api.createSession(csv, schema);
      this.state.avpPayloads.clear();
      this.state.vjSeries = null;
      this.state.status = `session ${this.state.view.id} created (${this.state.view.n} rows)`;
    });
  }

  async applyGrid(m1: number, m2: number, lambda: number) {
    await this.guard(async () => {
      const view = this.requireSession();
      this.state.view = await this.api.applyGrid(view.id, m1, m2, lambda);
      this.state.avpPayloads.clear();
      this.state.vjSeries = null;
      this.state.status = `gridded to ${m1} x ${m2} (lambda ${lambda})`;
    });
  }

  async startFit(method: string, nu: number, seed: number) {
    await this.guard(async () => {
      const view = this.requireSession();
      const poll = await this.api.startFit(view.id, method, nu, seed);
      this.state.fitToken = poll.token;
      this.state.status = `fit running (token ${poll.token})`;
      this.render();
      await this.pollUntilDone(view.id, poll.token);
    });
  }

  async pollUntilDone(sessionId: string, token: string) {
    for (;;) {
      const poll = await this.api.pollFit(sessionId, token);
      if (poll.status === 'running') {
        await new Promise((r) => setTimeout(r, this.pollDelayMs));
        continue;
      }
      this.state.fitToken = null;
      if (poll.status === 'done') {
        this.state.view = await this.api.getSession(sessionId);
        this.state.avpPayloads.clear();
        this.state.vjSeries = null;
        this.state.status = 'fit finished';
      } else if (poll.status === 'cancelled') {
        this.state.status = 'fit cancelled';
      } else {
        this.state.status = `fit failed: ${poll.error ?? 'unknown'}`;
      }
      return;
    }
  }

  async cancelFit() {
    await this.guard(async () => {
      const view = this.requireSession();
      if (this.state.fitToken) {
        await this.api.cancelFit(view.id, this.state.fitToken);
        this.state.fitToken = null;
        this.state.status = 'fit cancelled';
      }
    });
  }

  async loadGallery() {
    await this.guard(async () => {
      const view = this.requireSession();
      this.state.avpPayloads.clear();
      for (const name of view.candidates) {
        try {
          this.state.avpPayloads.set(
            name,
            await this.api.avp(view.id, name, this.state.domain),
          );
        } catch (err) {
          if (!(err instanceof ServiceError)) throw err;
          // in-model or degenerate candidates stay grey
        }
      }
      this.state.status = `added-variable gallery (${this.state.domain} domain)`;
    });
  }

  async toggleDomain() {
    this.state.domain = this.state.domain === 'spectral' ? 'observation' : 'spectral';
    await this.loadGallery();
  }

  async addCovariate(name: string, synthetic?: string) {
    await this.guard(async () => {
      const view = this.requireSession();
      this.state.view = await this.api.addCovariate(view.id, name, synthetic);
      this.state.avpPayloads.delete(name);
      this.state.status = `added ${name}; refit to update estimates`;
    });
  }

  async removeCovariate(name: string) {
    await this.guard(async () => {
      const view = this.requireSession();
      this.state.view = await this.api.removeCovariate(view.id, name);
      this.state.status = `removed ${name}; refit to update estimates`;
    });
  }

  flagFrequency(j: number) {
    this.state.focusJ = j;
    this.state.status = `flagged j=${j}; gallery badges mark candidates it influences`;
    this.render();
  }

  private requireSession(): SessionView {
    if (!this.state.view) throw new ServiceError(0, 'no session yet');
    return this.state.view;
  }

  private async guard(fn: () => Promise<void>) {
    try {
      await fn();
    } catch (err) {
      this.state.status =
        err instanceof ServiceError ? `error ${err.status}: ${err.message}` : String(err);
    }
    this.render();
  }

  // ------------------------------------------------------------------
  // rendering
  // ------------------------------------------------------------------

  render() {
    this.root.textContent = '';
    this.root.appendChild(this.renderStatus());
    this.root.appendChild(this.renderUpload());
    if (!this.state.view) return;
    this.root.appendChild(this.renderGridPanel());
    this.root.appendChild(this.renderFitPanel());
    this.root.appendChild(this.renderFitCard());
    this.root.appendChild(this.renderDesign());
    this.root.appendChild(this.renderDiagnostics());
    this.root.appendChild(this.renderGallery());
    this.root.appendChild(this.renderTimeline());
  }

  private renderStatus(): HTMLElement {
    const bar = div('status', this.state.status);
    bar.id = 'status';
    return bar;
  }

  private renderUpload(): HTMLElement {
    const panel = div('panel upload');
    panel.appendChild(div('panel-title', 'data'));
    const csv = document.createElement('textarea');
    csv.id = 'csv-input';
    csv.rows = 4;
    csv.placeholder = 'paste CSV (header row first)';
    panel.appendChild(csv);
    panel.appendChild(labeledInput('location columns (comma)', 'loc-input', 'e,n'));
    panel.appendChild(labeledInput('outcome column', 'outcome-input', 'y'));
    panel.appendChild(labeledInput('covariate columns (comma)', 'cov-input', ''));
    panel.appendChild(
      button('Create session', () => {
        const locs = (panel.querySelector('#loc-input') as HTMLInputElement).value
          .split(',')
          .map((s) => s.trim())
          .filter(Boolean);
        const outcome = (panel.querySelector('#outcome-input') as HTMLInputElement).value.trim();
        const covs = (panel.querySelector('#cov-input') as HTMLInputElement).value
          .split(',')
          .map((s) => s.trim())
          .filter(Boolean);
        void this.createSession(csv.value, locs, outcome, covs);
      }),
    );
    return panel;
  }

  private renderGridPanel(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel grid');
    panel.appendChild(div('panel-title', 'grid'));
    panel.appendChild(
      div('grid-state', view.grid ? `grid: ${view.grid.join(' x ')}` : 'irregular locations'),
    );
    panel.appendChild(labeledInput('M1', 'm1-input', '8'));
    panel.appendChild(labeledInput('M2', 'm2-input', '8'));
    panel.appendChild(labeledInput('lambda', 'lambda-input', '7'));
    panel.appendChild(
      button('Apply IDW grid', () => {
        const m1 = Number((panel.querySelector('#m1-input') as HTMLInputElement).value);
        const m2 = Number((panel.querySelector('#m2-input') as HTMLInputElement).value);
        const lambda = Number((panel.querySelector('#lambda-input') as HTMLInputElement).value);
        void this.applyGrid(m1, m2, lambda);
      }),
    );
    return panel;
  }

  private renderFitPanel(): HTMLElement {
    const panel = div('panel fit');
    panel.appendChild(div('panel-title', 'fit'));
    const method = document.createElement('select');
    method.id = 'method-select';
    for (const m of ['exact', 'approximate']) {
      const opt = document.createElement('option');
      opt.value = m;
      opt.textContent = m;
      method.appendChild(opt);
    }
    panel.appendChild(method);
    panel.appendChild(labeledInput('nu', 'nu-input', '0.5'));
    panel.appendChild(labeledInput('seed', 'seed-input', '0'));
    if (this.state.fitToken) {
      panel.appendChild(div('fit-running', `fit in progress (${this.state.fitToken})`));
      panel.appendChild(button('Cancel', () => void this.cancelFit(), 'btn cancel'));
    } else {
      panel.appendChild(
        button('Fit model', () => {
          const nu = Number((panel.querySelector('#nu-input') as HTMLInputElement).value);
          const seed = Number((panel.querySelector('#seed-input') as HTMLInputElement).value);
          void this.startFit(method.value, nu, seed);
        }),
      );
    }
    return panel;
  }

  private renderFitCard(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel fit-card');
    panel.id = 'fit-card';
    panel.appendChild(div('panel-title', 'latest fit'));
    const rows = fitCard(view.latest_fit);
    if (rows.length === 0) {
      panel.appendChild(div('empty', 'no fit yet'));
      return panel;
    }
    for (const [key, value] of rows) {
      const row = div('kv');
      const k = document.createElement('span');
      k.className = 'k';
      k.textContent = key;
      const v = document.createElement('span');
      v.className = 'v';
      v.dataset['field'] = key;
      v.textContent = value;
      row.appendChild(k);
      row.appendChild(v);
      panel.appendChild(row);
    }
    return panel;
  }

  private renderDesign(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel design');
    panel.appendChild(div('panel-title', 'design'));
    const chips = div('chips');
    chips.id = 'design-chips';
    for (const name of designChips(view)) {
      const chip = div('chip', name);
      chip.dataset['name'] = name;
      if (name !== 'intercept') {
        chip.appendChild(button('x', () => void this.removeCovariate(name), 'chip-remove'));
      }
      chips.appendChild(chip);
    }
    panel.appendChild(chips);
    const synth = div('synthetic');
    for (const kind of ['ns_linear', 'ns_quadratic', 'ew_linear', 'ew_quadratic']) {
      synth.appendChild(
        button(`+ ${kind}`, () => void this.addCovariate(kind, kind), 'btn synth'),
      );
    }
    panel.appendChild(synth);
    return panel;
  }

  private renderDiagnostics(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel diagnostics');
    panel.id = 'vj-panel';
    panel.appendChild(div('panel-title', 'v_j^2 by frequency index'));
    if (!view.latest_fit || !view.latest_fit.v_sq) {
      panel.appendChild(div('empty', 'fit a gridded model to see the spectrum'));
      return panel;
    }
    panel.appendChild(
      button('Load diagnostics', () => void this.loadDiagnostics(), 'btn load-vj'),
    );
    const holder = div('chart-holder');
    holder.id = 'vj-chart';
    if (this.state.vjSeries) {
      holder.appendChild(
        renderVjPlot(this.state.vjSeries, 640, 400, {
          onFlag: (j) => this.flagFrequency(j),
        }),
      );
    }
    panel.appendChild(holder);
    if (this.state.focusJ !== null) {
      panel.appendChild(div('focus', `flagged j=${this.state.focusJ}`));
    }
    return panel;
  }

  private async loadDiagnostics() {
    await this.guard(async () => {
      const view = this.requireSession();
      this.state.vjSeries = await this.api.diagnostics(view.id);
      this.state.status = `spectrum loaded (${this.state.vjSeries.entries.length} components)`;
    });
  }

  private renderGallery(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel gallery');
    panel.id = 'avp-gallery';
    panel.appendChild(div('panel-title', 'added variable plots'));
    const controls = div('gallery-controls');
    controls.appendChild(
      button(`domain: ${this.state.domain} (toggle)`, () => void this.toggleDomain(), 'btn domain-toggle'),
    );
    controls.appendChild(button('Load gallery', () => void this.loadGallery(), 'btn load-gallery'));
    panel.appendChild(controls);
    const grid = div('gallery-grid');
    for (const entry of orderByP(galleryRows(view, this.state.avpPayloads))) {
      const cell = div('avp-cell');
      cell.dataset['candidate'] = entry.name;
      const head = div('avp-head', entry.name);
      cell.appendChild(head);
      if (entry.inModel) {
        cell.classList.add('in-model');
        cell.appendChild(div('badges', 'slope -- p --'));
      } else if (entry.payload) {
        const badges = div('badges');
        badges.textContent =
          `slope ${displayNumber(entry.payload.slope)} ` +
          `p ${displayNumber(entry.payload.p_value)}`;
        cell.appendChild(badges);
        const cooks = topCookIds(entry.payload);
        const cookLine = div('cook-badges', `top cook: ${cooks.join(', ')}`);
        if (this.state.focusJ !== null && cooks.includes(this.state.focusJ)) {
          cookLine.classList.add('covers-focus');
          cookLine.textContent += ` (covers j=${this.state.focusJ})`;
        }
        cell.appendChild(cookLine);
        cell.appendChild(renderAvpChart(entry.payload));
        cell.appendChild(
          button('Add to model', () => void this.addCovariate(entry.name), 'btn add-covariate'),
        );
      } else {
        cell.appendChild(div('badges', 'not loaded'));
      }
      grid.appendChild(cell);
    }
    panel.appendChild(grid);
    return panel;
  }

  private renderTimeline(): HTMLElement {
    const view = this.state.view!;
    const panel = div('panel timeline');
    panel.id = 'timeline';
    panel.appendChild(div('panel-title', 'steps'));
    const latest = view.latest_fit;
    if (!latest) {
      panel.appendChild(div('empty', 'no fits yet'));
      return panel;
    }
    void this.api.history(view.id).then((h) => {
      const list = document.createElement('ol');
      for (const step of timeline(h.fit_history)) {
        const li = document.createElement('li');
        li.textContent = `${step.label} [${step.design.join(', ') || 'intercept only'}] -> (${(step.params ?? []).join(', ')})`;
        list.appendChild(li);
      }
      panel.appendChild(list);
    });
    return panel;
  }
}

export function mount(root: HTMLElement, baseUrl = ''): App {
  const app = new App(root, new ApiClient(baseUrl));
  app.render();
  return app;
}
