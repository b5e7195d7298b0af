import type { HealthInfo, PredictionResult, VocabularyPage } from './types.js';

/** Minimal surface the board needs from the prediction service. */
export interface BoardService {
  predict(prefix: string[], n: number, signal?: AbortSignal): Promise<PredictionResult>;
  vocabulary(page: number, size: number): Promise<VocabularyPage>;
  health(): Promise<HealthInfo>;
  imageUrl(path: string | null): string | null;
}

/** HTTP client for the prediction service REST API. */
export class PredictionClient implements BoardService {
  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl: string, fetchFn: typeof fetch = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new Error(`${response.status}: ${detail}`);
    }
    return (await response.json()) as T;
  }

  predict(prefix: string[], n: number, signal?: AbortSignal): Promise<PredictionResult> {
    return this.request<PredictionResult>('/predict', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ prefix, n }),
      signal,
    });
  }

  vocabulary(page: number, size: number): Promise<VocabularyPage> {
    return this.request<VocabularyPage>(`/vocabulary?page=${page}&size=${size}`);
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>('/health');
  }

  imageUrl(path: string | null): string | null {
    return path === null ? null : `${this.baseUrl}${path}`;
  }
}

/**
 * Latest-wins request gate: starting a new request aborts the in-flight
 * one, and a superseded response is reported as `undefined` so callers
 * simply drop it.
 */
export class LatestWins {
  private controller: AbortController | null = null;
  private sequence = 0;

  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | undefined> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.sequence;
    try {
      const result = await task(controller.signal);
      return ticket === this.sequence ? result : undefined;
    } catch (error) {
      if (controller.signal.aborted || ticket !== this.sequence) {
        return undefined; // superseded; the newer request owns the board
      }
      throw error;
    }
  }
}
