// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { BUTTONS_BY_STATE, TooltipController, TOOLTIP_TRIGGER_MS } from '../src/tooltip.js';
import type { DotVisualState } from '../src/types.js';

interface Harness {
  ctrl: TooltipController;
  hovers: Array<{ kind: string; pid: number; at: number }>;
  feedback: Array<{ action: string; pid: number }>;
  setState(state: DotVisualState): void;
  setClock(ms: number): void;
  failFetch(fail: boolean): void;
}

function harness(): Harness {
  const host = document.createElement('div');
  document.body.appendChild(host);
  let state: DotVisualState = 'default';
  let clock = 0;
  let fail = false;
  const hovers: Harness['hovers'] = [];
  const feedback: Harness['feedback'] = [];
  const ctrl = new TooltipController({
    host,
    fetchText: (pid) =>
      fail ? Promise.reject(new Error('offline')) : Promise.resolve(`post ${pid}`),
    stateOf: () => state,
    emitHover: (kind, pid, at) => hovers.push({ kind, pid, at }),
    onFeedback: (action, pid) => feedback.push({ action, pid }),
    now: () => clock,
    inputsEnabled: () => true,
  });
  return {
    ctrl,
    hovers,
    feedback,
    setState: (s) => (state = s),
    setClock: (ms) => (clock = ms),
    failFetch: (f) => (fail = f),
  };
}

function buttonActions(ctrl: TooltipController): string[] {
  return [...ctrl.element.querySelectorAll('button[data-action]')].map(
    (b) => (b as HTMLElement).dataset.action ?? '',
  );
}

describe('tooltip dwell gating', () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
    document.body.replaceChildren();
  });

  it('shows nothing at 299 ms dwell and emits no events', async () => {
    const h = harness();
    h.ctrl.pointerOver(7, 100, 100);
    await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS - 1);
    expect(h.ctrl.visible).toBe(false);
    h.ctrl.pointerOut();
    await vi.runAllTimersAsync();
    expect(h.ctrl.visible).toBe(false);
    expect(h.hovers).toEqual([]);
  });

  it('shows the tooltip at exactly 300 ms with the text', async () => {
    const h = harness();
    h.setClock(1000);
    h.ctrl.pointerOver(7, 100, 100);
    await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS);
    expect(h.ctrl.visible).toBe(true);
    expect(h.ctrl.element.textContent).toContain('post 7');
  });

  it.each([
    ['suggested', ['bookmark_add', 'irrelevant_flag']],
    ['bookmarked', ['bookmark_remove']],
    ['default', ['bookmark_add']],
  ] as Array<[DotVisualState, string[]]>)(
    'offers the context-correct buttons on a %s dot',
    async (state, expected) => {
      const h = harness();
      h.setState(state);
      h.ctrl.pointerOver(3, 50, 50);
      await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS);
      expect(buttonActions(h.ctrl)).toEqual(expected);
      expect(BUTTONS_BY_STATE[state].map((b) => b.action)).toEqual(expected);
    },
  );

  it('emits hover_start stamped at pointer enter, hover_end at leave', async () => {
    const h = harness();
    h.setClock(5000);
    h.ctrl.pointerOver(9, 10, 10);
    h.setClock(5300);
    await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS);
    expect(h.hovers).toEqual([{ kind: 'hover_start', pid: 9, at: 5000 }]);
    h.setClock(5900);
    h.ctrl.pointerOut();
    expect(h.hovers).toEqual([
      { kind: 'hover_start', pid: 9, at: 5000 },
      { kind: 'hover_end', pid: 9, at: 5900 },
    ]);
  });

  it('moving between dots restarts the dwell clock', async () => {
    const h = harness();
    h.ctrl.pointerOver(1, 0, 0);
    await vi.advanceTimersByTimeAsync(200);
    h.ctrl.pointerOver(2, 5, 5);
    await vi.advanceTimersByTimeAsync(200);
    expect(h.ctrl.visible).toBe(false); // neither dot reached 300 ms
    await vi.advanceTimersByTimeAsync(100);
    expect(h.ctrl.visible).toBe(true);
    expect(h.ctrl.element.textContent).toContain('post 2');
  });

  it('failed text fetch shows retry and emits nothing', async () => {
    const h = harness();
    h.failFetch(true);
    h.ctrl.pointerOver(4, 0, 0);
    await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS);
    expect(h.ctrl.visible).toBe(true);
    expect(h.ctrl.element.textContent).toContain('could not load');
    expect(h.hovers).toEqual([]);
    expect(buttonActions(h.ctrl)).toEqual([]);
    h.failFetch(false);
    (h.ctrl.element.querySelector('.tooltip-retry') as HTMLButtonElement).click();
    await vi.runAllTimersAsync();
    expect(h.ctrl.element.textContent).toContain('post 4');
    expect(h.hovers).toEqual([{ kind: 'hover_start', pid: 4, at: 0 }]);
  });

  it('clicking a button forwards the feedback action', async () => {
    const h = harness();
    h.setState('suggested');
    h.ctrl.pointerOver(11, 0, 0);
    await vi.advanceTimersByTimeAsync(TOOLTIP_TRIGGER_MS);
    const btn = h.ctrl.element.querySelector(
      'button[data-action="irrelevant_flag"]',
    ) as HTMLButtonElement;
    btn.click();
    expect(h.feedback).toEqual([{ action: 'irrelevant_flag', pid: 11 }]);
  });
});
