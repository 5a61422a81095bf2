/** The foraging workbench: wires the dot map, tooltip, sidebar, timer,
 * and event queue against a running service.
 *
 * Dot states are recomputed from each service response: suggestions
 * come verbatim from the feedback response, bookmarks from the
 * server-confirmed event ledger. No relevance state lives client-side.
 */

import { ApiError, ForageClient } from './api.js';
import { DotLayer, type DrawContext } from './dots.js';
import { EventQueue } from './queue.js';
import { BookmarkSidebar } from './sidebar.js';
import { CountdownTimer } from './timer.js';
import { TooltipController } from './tooltip.js';
import type {
  FeedbackKind,
  FeedbackResponse,
  SessionEvent,
  SessionInfo,
  Suggestion,
} from './types.js';

export interface WorkbenchElements {
  canvas: HTMLCanvasElement;
  tooltipHost: HTMLElement;
  sidebarList: HTMLElement;
  sidebarCount: HTMLElement;
  timerEl: HTMLElement;
  exitButton: HTMLButtonElement;
  statusEl?: HTMLElement;
}

export interface WorkbenchOptions {
  baseUrl: string;
  datasetId: string;
  sessionId?: string;
  policy?: { kind: string; [key: string]: unknown };
  batchSize?: number;
  budgetMs?: number;
  flushIntervalMs?: number;
  /** Injectable for tests; defaults to a real 2d context. */
  context?: DrawContext;
  now?: () => number;
}

export class Workbench {
  readonly client: ForageClient;
  readonly layer: DotLayer;
  readonly session: SessionInfo;
  readonly queue: EventQueue;
  readonly tooltip: TooltipController;
  readonly sidebar: BookmarkSidebar;
  readonly timer: CountdownTimer;

  /** Latest suggestion batch, exactly as the service sent it. */
  suggestions: Suggestion[] = [];
  utility = 0;

  private readonly els: WorkbenchElements;
  private readonly ctx: DrawContext;
  private readonly startedAt: number;
  private readonly wallNow: () => number;
  private readonly datasetId: string;
  private bookmarked = new Map<number, string>();
  private textCache = new Map<number, string>();
  private inputsEnabled = true;

  private constructor(
    els: WorkbenchElements,
    opts: WorkbenchOptions,
    layer: DotLayer,
    session: SessionInfo,
    ctx: DrawContext,
  ) {
    this.els = els;
    this.layer = layer;
    this.session = session;
    this.ctx = ctx;
    this.datasetId = opts.datasetId;
    this.client = new ForageClient(opts.baseUrl);
    this.wallNow = opts.now ?? (() => Date.now());
    this.startedAt = this.wallNow();
    this.queue = new EventQueue(
      (events) => this.client.postEvents(session.session_id, events),
      {
        flushIntervalMs: opts.flushIntervalMs ?? 2000,
        onResponse: (resp, sent) => this.applyResponse(resp, sent),
        onError: (err) => this.setStatus(`sync problem: ${String(err)}`),
        dropOn: (err) =>
          err instanceof ApiError && err.status >= 400 && err.status < 500,
      },
    );
    this.tooltip = new TooltipController({
      host: els.tooltipHost,
      fetchText: (pid) => this.fetchText(pid),
      stateOf: (pid) => this.layer.stateOf(pid),
      emitHover: (kind, pid, at) => void this.queue.enqueue(kind, pid, at),
      onFeedback: (action, pid) => void this.sendFeedback(action, pid),
      now: () => this.sessionTime(),
      inputsEnabled: () => this.inputsEnabled,
    });
    this.sidebar = new BookmarkSidebar(els.sidebarList, els.sidebarCount, (pid) =>
      void this.sendFeedback('bookmark_remove', pid),
    );
    this.timer = new CountdownTimer(
      els.timerEl,
      session.budget_ms,
      this.startedAt,
      () => this.disableInputs('time is up'),
      this.wallNow,
    );
  }

  static async create(els: WorkbenchElements, opts: WorkbenchOptions): Promise<Workbench> {
    const client = new ForageClient(opts.baseUrl);
    const points = await client.points(opts.datasetId);
    const layer = new DotLayer(points, {
      width: els.canvas.width,
      height: els.canvas.height,
    });
    const session = await client.createSession({
      dataset_id: opts.datasetId,
      policy: opts.policy,
      batch_size: opts.batchSize,
      budget_ms: opts.budgetMs,
      session_id: opts.sessionId,
    });
    const ctx =
      opts.context ?? (els.canvas.getContext('2d') as unknown as DrawContext);
    const bench = new Workbench(els, opts, layer, session, ctx);
    bench.layer.renderAll(bench.ctx);
    bench.sidebar.update([], 0, true);
    bench.queue.start();
    bench.timer.start();
    bench.bindDom();
    return bench;
  }

  // -- input plumbing ------------------------------------------------

  private bindDom(): void {
    this.els.canvas.addEventListener('pointermove', (ev) => {
      const rect = this.els.canvas.getBoundingClientRect();
      this.handlePointer(ev.clientX - rect.left, ev.clientY - rect.top);
    });
    this.els.canvas.addEventListener('pointerleave', () => this.tooltip.pointerOut());
    this.els.exitButton.addEventListener('click', () => void this.exit());
  }

  handlePointer(x: number, y: number): void {
    const hit = this.layer.hitTest(x, y);
    if (hit === null) {
      this.tooltip.pointerOut();
    } else {
      const pos = this.layer.screenOf(hit);
      this.tooltip.pointerOver(hit, pos.x, pos.y);
    }
  }

  sessionTime(): number {
    return Math.max(0, Math.round(this.wallNow() - this.startedAt));
  }

  private async fetchText(pid: number): Promise<string> {
    const cached = this.textCache.get(pid);
    if (cached !== undefined) return cached;
    const detail = await this.client.point(this.datasetId, pid);
    this.textCache.set(pid, detail.text);
    return detail.text;
  }

  // -- feedback ------------------------------------------------------

  async sendFeedback(action: FeedbackKind, pid: number): Promise<void> {
    if (!this.inputsEnabled) return;
    this.tooltip.pointerOut();
    await this.queue.enqueue(action, pid, this.sessionTime());
  }

  /** Fold a confirmed batch into the bookmark ledger, then recompute
   * every dot's state from the response. */
  private applyResponse(resp: FeedbackResponse, sent: SessionEvent[]): void {
    for (const ev of sent) {
      if (ev.kind === 'bookmark_add' && ev.point_id !== null) {
        this.bookmarked.set(ev.point_id, this.textCache.get(ev.point_id) ?? `#${ev.point_id}`);
      } else if (ev.kind === 'bookmark_remove' && ev.point_id !== null) {
        this.bookmarked.delete(ev.point_id);
      }
    }
    this.suggestions = resp.suggestions;
    this.utility = resp.utility;
    const changed = this.layer.setStates(
      resp.suggestions.map((s) => s.point_id),
      this.bookmarked.keys(),
    );
    this.layer.renderChanged(this.ctx, changed);
    this.sidebar.update(
      [...this.bookmarked.entries()].map(([id, text]) => ({ id, text })),
      resp.utility,
      this.inputsEnabled,
    );
  }

  // -- lifecycle -------------------------------------------------------

  private disableInputs(reason: string): void {
    this.inputsEnabled = false;
    this.tooltip.pointerOut();
    this.sidebar.update(
      [...this.bookmarked.entries()].map(([id, text]) => ({ id, text })),
      this.utility,
      false,
    );
    this.setStatus(`${reason} - discoveries: ${this.utility}`);
  }

  async exit(): Promise<void> {
    if (!this.inputsEnabled) return;
    await this.queue.enqueue('session_end', null, this.sessionTime());
    await this.queue.settle();
    this.timer.stop();
    this.queue.stop();
    this.disableInputs('session ended');
  }

  private setStatus(text: string): void {
    if (this.els.statusEl) this.els.statusEl.textContent = text;
  }
}
