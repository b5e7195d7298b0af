import { describe, expect, it, vi } from 'vitest';

import { LatestWins, PredictionClient } from '../src/api.js';

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('PredictionClient', () => {
  it('posts the prefix and n to /predict', async () => {
    const fetchFn = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      expect(String(url)).toBe('http://svc/predict');
      expect(init?.method).toBe('POST');
      expect(JSON.parse(String(init?.body))).toEqual({ prefix: ['6481', '31141'], n: 6 });
      return jsonResponse({ items: [], model_id: 'm', latency_ms: 1 });
    });
    const client = new PredictionClient('http://svc/', fetchFn as unknown as typeof fetch);
    const result = await client.predict(['6481', '31141'], 6);
    expect(result.model_id).toBe('m');
    expect(fetchFn).toHaveBeenCalledTimes(1);
  });

  it('surfaces the service error detail', async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse({ detail: 'unknown token: 999999999' }, 422),
    );
    const client = new PredictionClient('http://svc', fetchFn as unknown as typeof fetch);
    await expect(client.predict(['999999999'], 6)).rejects.toThrow(
      '422: unknown token: 999999999',
    );
  });

  it('requests vocabulary pages', async () => {
    const fetchFn = vi.fn(async (url: RequestInfo | URL) => {
      expect(String(url)).toBe('http://svc/vocabulary?page=2&size=36');
      return jsonResponse({ page: 2, size: 36, total: 100, items: [] });
    });
    const client = new PredictionClient('http://svc', fetchFn as unknown as typeof fetch);
    const page = await client.vocabulary(2, 36);
    expect(page.total).toBe(100);
  });

  it('builds absolute image urls and passes null through', () => {
    const client = new PredictionClient('http://svc');
    expect(client.imageUrl('/pictograms/7/image')).toBe('http://svc/pictograms/7/image');
    expect(client.imageUrl(null)).toBeNull();
  });
});

describe('LatestWins', () => {
  it('returns results when not superseded', async () => {
    const gate = new LatestWins();
    const result = await gate.run(async () => 41 + 1);
    expect(result).toBe(42);
  });

  it('aborts the in-flight request and discards its result', async () => {
    const gate = new LatestWins();
    let firstSignal: AbortSignal | undefined;
    const first = gate.run(async (signal) => {
      firstSignal = signal;
      await new Promise((resolve) => setTimeout(resolve, 20));
      if (signal.aborted) throw new DOMException('aborted', 'AbortError');
      return 'first';
    });
    const second = gate.run(async () => 'second');
    expect(await second).toBe('second');
    expect(await first).toBeUndefined();
    expect(firstSignal?.aborted).toBe(true);
  });

  it('a slow superseded task that still resolves is dropped', async () => {
    const gate = new LatestWins();
    // A backend that ignores the abort signal entirely.
    const first = gate.run(async () => {
      await new Promise((resolve) => setTimeout(resolve, 20));
      return 'stale';
    });
    const second = gate.run(async () => 'fresh');
    expect(await second).toBe('fresh');
    expect(await first).toBeUndefined();
  });

  it('propagates genuine failures of the current request', async () => {
    const gate = new LatestWins();
    await expect(
      gate.run(async () => {
        throw new Error('503: busy');
      }),
    ).rejects.toThrow('503: busy');
  });
});
