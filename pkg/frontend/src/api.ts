/**
 * Typed client for the session service JSON API.
 * Every numeric shown in the UI comes from these payloads untouched.
 */

export type FitParams = { sigma_s2: number; sigma_e2: number; rho: number };

export type BetaRow = { name: string; estimate: number; se: number; p: number };

export type FitRecord = {
  method: string;
  nu: number | null;
  params: FitParams;
  objective: number;
  beta: BetaRow[];
  v_sq: number[] | null;
  converged: boolean;
  n_starts: number;
  design?: string[];
  seed?: number;
};

export type SessionView = {
  id: string;
  n: number;
  grid: number[] | null;
  design: string[];
  candidates: string[];
  fit_count: number;
  latest_fit: FitRecord | null;
  fit_in_progress: boolean;
};

export type VjEntry = { j: number; v_sq: number; fitted: number };
export type VjSeries = { params_ref: Record<string, unknown>; entries: VjEntry[] };

export type AvpPoint = { id: number; x: number; y: number; cook: number };
export type AvpPayload = {
  domain: 'observation' | 'spectral';
  covariate_name: string;
  slope: number;
  se: number;
  p_value: number;
  points: AvpPoint[];
  bands?: Array<{ lo: number; hi: number }>;
};

export type FitPoll = {
  token: string;
  status: 'running' | 'done' | 'failed' | 'cancelled';
  result?: FitRecord;
  error?: string;
};

export class ServiceError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { 'content-type': 'application/json' },
    ...init,
  });
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    const detail =
      typeof body === 'object' && body !== null && 'detail' in body
        ? String((body as { detail: unknown }).detail)
        : res.statusText;
    throw new ServiceError(res.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(private base: string = '') {}

  createSession(csv: string, schema: Record<string, unknown>): Promise<SessionView> {
    return request(this.base, '/sessions', {
      method: 'POST',
      body: JSON.stringify({ csv, schema }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return request(this.base, `/sessions/${id}`);
  }

  applyGrid(id: string, m1: number, m2: number, lambda: number): Promise<SessionView> {
    return request(this.base, `/sessions/${id}/grid`, {
      method: 'POST',
      body: JSON.stringify({ m1, m2, lambda }),
    });
  }

  startFit(id: string, method: string, nu: number, seed: number): Promise<FitPoll> {
    return request(this.base, `/sessions/${id}/fit`, {
      method: 'POST',
      body: JSON.stringify({ method, nu, seed }),
    });
  }

  pollFit(id: string, token: string): Promise<FitPoll> {
    return request(this.base, `/sessions/${id}/fits/${token}`);
  }

  cancelFit(id: string, token: string): Promise<FitPoll> {
    return request(this.base, `/sessions/${id}/fits/${token}`, { method: 'DELETE' });
  }

  diagnostics(id: string): Promise<VjSeries> {
    return request(this.base, `/sessions/${id}/diagnostics`);
  }

  avp(id: string, candidate: string, domain: string): Promise<AvpPayload> {
    const q = new URLSearchParams({ candidate, domain });
    return request(this.base, `/sessions/${id}/avp?${q.toString()}`);
  }

  addCovariate(id: string, name: string, synthetic?: string): Promise<SessionView> {
    return request(this.base, `/sessions/${id}/covariates`, {
      method: 'POST',
      body: JSON.stringify({ action: 'add', name, synthetic: synthetic ?? null }),
    });
  }

  removeCovariate(id: string, name: string): Promise<SessionView> {
    return request(this.base, `/sessions/${id}/covariates`, {
      method: 'POST',
      body: JSON.stringify({ action: 'remove', name, synthetic: null }),
    });
  }

  history(id: string): Promise<{ id: string; fit_history: FitRecord[] }> {
    return request(this.base, `/sessions/${id}/history`);
  }
}
