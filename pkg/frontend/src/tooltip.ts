/** Dwell-gated tooltip with context-dependent feedback buttons.
 *
 * A tooltip opens after the pointer rests 300 ms on one dot; its
 * buttons depend on the dot's visual state, so no control is ever
 * offered that the session protocol would reject:
 *   suggested  -> add bookmark | irrelevant suggestion
 *   bookmarked -> remove bookmark
 *   default    -> add bookmark
 *
 * hover_start is queued (with the pointer-enter timestamp) once the
 * tooltip successfully shows its text; hover_end is queued when the
 * pointer leaves. A failed text fetch shows a retry affordance and
 * emits nothing.
 */

import type { DotVisualState } from './types.js';

export const TOOLTIP_TRIGGER_MS = 300;

export interface TooltipDeps {
  host: HTMLElement;
  fetchText(pointId: number): Promise<string>;
  stateOf(pointId: number): DotVisualState;
  emitHover(kind: 'hover_start' | 'hover_end', pointId: number, at: number): void;
  onFeedback(action: 'bookmark_add' | 'bookmark_remove' | 'irrelevant_flag', pointId: number): void;
  /** Session-relative clock in ms. */
  now(): number;
  /** Feedback buttons are suppressed when the session is over. */
  inputsEnabled(): boolean;
}

export const BUTTONS_BY_STATE: Record<DotVisualState, Array<{ action: 'bookmark_add' | 'bookmark_remove' | 'irrelevant_flag'; label: string }>> = {
  suggested: [
    { action: 'bookmark_add', label: 'add bookmark' },
    { action: 'irrelevant_flag', label: 'irrelevant suggestion' },
  ],
  bookmarked: [{ action: 'bookmark_remove', label: 'remove bookmark' }],
  default: [{ action: 'bookmark_add', label: 'add bookmark' }],
};

export class TooltipController {
  readonly element: HTMLElement;

  private deps: TooltipDeps;
  private hoverId: number | null = null;
  private enteredAt = 0;
  private dwellTimer: ReturnType<typeof setTimeout> | null = null;
  /** Dot id with an emitted, un-ended hover_start. */
  private openHoverId: number | null = null;
  private fetchToken = 0;

  constructor(deps: TooltipDeps) {
    this.deps = deps;
    this.element = deps.host.ownerDocument.createElement('div');
    this.element.className = 'forage-tooltip';
    this.element.style.position = 'absolute';
    this.element.style.display = 'none';
    deps.host.appendChild(this.element);
  }

  get visible(): boolean {
    return this.element.style.display !== 'none';
  }

  get activePointId(): number | null {
    return this.hoverId;
  }

  /** Pointer moved onto a dot (or between dots). */
  pointerOver(pointId: number, x: number, y: number): void {
    if (pointId === this.hoverId) return;
    this.pointerOut();
    this.hoverId = pointId;
    this.enteredAt = this.deps.now();
    this.dwellTimer = setTimeout(() => {
      this.dwellTimer = null;
      this.open(pointId, x, y);
    }, TOOLTIP_TRIGGER_MS);
  }

  /** Pointer left the dot (or the map). */
  pointerOut(): void {
    if (this.dwellTimer !== null) {
      clearTimeout(this.dwellTimer);
      this.dwellTimer = null;
    }
    if (this.openHoverId !== null) {
      this.deps.emitHover('hover_end', this.openHoverId, this.deps.now());
      this.openHoverId = null;
    }
    this.hoverId = null;
    this.hide();
  }

  private hide(): void {
    this.fetchToken++;
    this.element.style.display = 'none';
    this.element.replaceChildren();
  }

  private open(pointId: number, x: number, y: number): void {
    this.element.style.left = `${x + 12}px`;
    this.element.style.top = `${y + 12}px`;
    this.element.style.display = 'block';
    this.renderLoading();
    void this.load(pointId);
  }

  private async load(pointId: number): Promise<void> {
    const token = ++this.fetchToken;
    let text: string;
    try {
      text = await this.deps.fetchText(pointId);
    } catch {
      if (token === this.fetchToken && this.hoverId === pointId) {
        this.renderError(pointId);
      }
      return;
    }
    if (token !== this.fetchToken || this.hoverId !== pointId) return;
    if (this.openHoverId !== pointId) {
      this.deps.emitHover('hover_start', pointId, this.enteredAt);
      this.openHoverId = pointId;
    }
    this.renderContent(pointId, text);
  }

  private renderLoading(): void {
    const doc = this.element.ownerDocument;
    const note = doc.createElement('span');
    note.className = 'tooltip-loading';
    note.textContent = '...';
    this.element.replaceChildren(note);
  }

  private renderError(pointId: number): void {
    const doc = this.element.ownerDocument;
    const note = doc.createElement('span');
    note.className = 'tooltip-error';
    note.textContent = 'could not load post';
    const retry = doc.createElement('button');
    retry.className = 'tooltip-retry';
    retry.textContent = 'retry';
    retry.addEventListener('click', () => {
      this.renderLoading();
      void this.load(pointId);
    });
    this.element.replaceChildren(note, retry);
  }

  private renderContent(pointId: number, text: string): void {
    const doc = this.element.ownerDocument;
    const body = doc.createElement('p');
    body.className = 'tooltip-text';
    body.textContent = text;
    const row = doc.createElement('div');
    row.className = 'tooltip-buttons';
    if (this.deps.inputsEnabled()) {
      for (const spec of BUTTONS_BY_STATE[this.deps.stateOf(pointId)]) {
        const btn = doc.createElement('button');
        btn.dataset.action = spec.action;
        btn.textContent = spec.label;
        btn.addEventListener('click', () => this.deps.onFeedback(spec.action, pointId));
        row.appendChild(btn);
      }
    }
    this.element.replaceChildren(body, row);
  }
}
