/** Thin typed client for the foraging service REST endpoints. */

import type {
  FeedbackResponse,
  PointDetail,
  PointRecord,
  SessionEvent,
  SessionInfo,
  Suggestion,
} from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(`HTTP ${status}: ${message}`);
  }
}

async function checked(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-json error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return resp;
}

export interface CreateSessionRequest {
  dataset_id: string;
  policy?: { kind: string; [key: string]: unknown };
  batch_size?: number;
  budget_ms?: number;
  session_id?: string;
}

export class ForageClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(this.url('/health'));
      return resp.ok;
    } catch {
      return false;
    }
  }

  async uploadDataset(content: string, format: 'csv' | 'jsonl' = 'csv'): Promise<string> {
    const resp = await checked(
      await fetch(this.url(`/datasets?format=${format}`), {
        method: 'POST',
        body: content,
      }),
    );
    const body = (await resp.json()) as { dataset_id: string };
    return body.dataset_id;
  }

  /** The bulk listing carries id,x,y only; text arrives per point on hover. */
  async points(datasetId: string): Promise<PointRecord[]> {
    const resp = await checked(await fetch(this.url(`/datasets/${datasetId}/points`)));
    const text = await resp.text();
    return text
      .split('\n')
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as PointRecord);
  }

  async point(datasetId: string, pointId: number): Promise<PointDetail> {
    const resp = await checked(
      await fetch(this.url(`/datasets/${datasetId}/points/${pointId}`)),
    );
    return (await resp.json()) as PointDetail;
  }

  async createSession(req: CreateSessionRequest): Promise<SessionInfo> {
    const resp = await checked(
      await fetch(this.url('/sessions'), {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(req),
      }),
    );
    return (await resp.json()) as SessionInfo;
  }

  async postEvents(sessionId: string, events: SessionEvent[]): Promise<FeedbackResponse> {
    const resp = await checked(
      await fetch(this.url(`/sessions/${sessionId}/events`), {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(events),
      }),
    );
    return (await resp.json()) as FeedbackResponse;
  }

  async suggestions(sessionId: string): Promise<Suggestion[]> {
    const resp = await checked(
      await fetch(this.url(`/sessions/${sessionId}/suggestions`)),
    );
    const body = (await resp.json()) as { suggestions: Suggestion[] };
    return body.suggestions;
  }

  async metrics(sessionId: string): Promise<{ utility: number; [key: string]: unknown }> {
    const resp = await checked(await fetch(this.url(`/sessions/${sessionId}/metrics`)));
    return (await resp.json()) as { utility: number };
  }
}
