/** Ordered event delivery to the service.
 *
 * Hover events batch up and flush on a periodic tick; feedback (label)
 * events flush immediately since only they move the suggestion batch.
 * At most one request is in flight; later events queue behind it and
 * ship in order on completion. Every event carries a client sequence
 * number so server-side retries stay idempotent.
 */

import type { FeedbackResponse, SessionEvent, EventKind } from './types.js';

export type SendFn = (events: SessionEvent[]) => Promise<FeedbackResponse>;

export interface EventQueueOptions {
  flushIntervalMs?: number;
  onResponse?: (resp: FeedbackResponse, sent: SessionEvent[]) => void;
  onError?: (err: unknown) => void;
  /** Return true to drop a rejected batch instead of retrying it
   * (e.g. 4xx protocol rejections). Default: retry everything. */
  dropOn?: (err: unknown) => boolean;
}

export class EventQueue {
  private pending: SessionEvent[] = [];
  private seq = 0;
  private inFlight = false;
  private wantFlush = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private readonly flushIntervalMs: number;
  private readonly onResponse?: (resp: FeedbackResponse, sent: SessionEvent[]) => void;
  private readonly onError?: (err: unknown) => void;
  private readonly dropOn: (err: unknown) => boolean;

  constructor(private readonly send: SendFn, opts: EventQueueOptions = {}) {
    this.flushIntervalMs = opts.flushIntervalMs ?? 2000;
    this.onResponse = opts.onResponse;
    this.onError = opts.onError;
    this.dropOn = opts.dropOn ?? (() => false);
  }

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => void this.flush(), this.flushIntervalMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  /** Append one event; feedback events force an immediate flush. */
  enqueue(kind: EventKind, pointId: number | null, at: number): Promise<void> {
    this.pending.push({ seq: ++this.seq, kind, point_id: pointId, at });
    const urgent = kind !== 'hover_start' && kind !== 'hover_end';
    return urgent ? this.flush() : Promise.resolve();
  }

  /** Ship everything pending, serializing behind any in-flight request. */
  async flush(): Promise<void> {
    if (this.inFlight) {
      this.wantFlush = true;
      return;
    }
    while (this.pending.length > 0) {
      const batch = this.pending;
      this.pending = [];
      this.inFlight = true;
      try {
        const resp = await this.send(batch);
        this.onResponse?.(resp, batch);
      } catch (err) {
        if (!this.dropOn(err)) {
          // put the batch back so order is preserved for the retry
          this.pending = batch.concat(this.pending);
        }
        this.onError?.(err);
        this.inFlight = false;
        return;
      }
      this.inFlight = false;
    }
    if (this.wantFlush) {
      this.wantFlush = false;
      if (this.pending.length > 0) await this.flush();
    }
  }

  /** Resolve once nothing is pending or in flight (test helper). */
  async settle(): Promise<void> {
    while (this.inFlight || this.pending.length > 0) {
      await this.flush();
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
  }
}
