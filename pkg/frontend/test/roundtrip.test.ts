// @vitest-environment jsdom
//
// End-to-end feedback round trip against a live service process on the
// synthetic clustered dataset: bookmark a suggested dot, watch it
// recolor, the batch refill to 10 from the POST response, and the
// sidebar count match the service's utility.
import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { Workbench, type WorkbenchElements } from '../src/app.js';
import { ForageClient } from '../src/api.js';
import type { DrawContext } from '../src/dots.js';

const PORT = 18000 + Math.floor(Math.random() * 10_000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workdir = '';
let datasetCsv = '';

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function recordingContext(): DrawContext {
  return {
    fillStyle: '',
    clearRect: () => void 0,
    beginPath: () => void 0,
    arc: () => void 0,
    fill: () => void 0,
  };
}

function dom(): WorkbenchElements {
  document.body.innerHTML = `
    <div id="wrap">
      <canvas id="map" width="900" height="600"></canvas>
      <ul id="list"></ul><span id="count">0</span>
      <span id="clock"></span><button id="exit">exit</button>
      <span id="status"></span>
    </div>`;
  return {
    canvas: document.querySelector('#map') as HTMLCanvasElement,
    tooltipHost: document.querySelector('#wrap') as HTMLElement,
    sidebarList: document.querySelector('#list') as HTMLElement,
    sidebarCount: document.querySelector('#count') as HTMLElement,
    timerEl: document.querySelector('#clock') as HTMLElement,
    exitButton: document.querySelector('#exit') as HTMLButtonElement,
    statusEl: document.querySelector('#status') as HTMLElement,
  };
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), 'forage-e2e-'));
  const csvPath = join(workdir, 'points.csv');
  execFileSync('python3', [
    '-m', 'activeforage.synth',
    '--out', csvPath,
    '--n', '400',
    '--incidence', '0.2',
    '--seed', '5',
  ]);
  datasetCsv = readFileSync(csvPath, 'utf-8');
  server = spawn(
    'python3',
    ['-m', 'activeforage.cli', 'serve', '--bind', `127.0.0.1:${PORT}`, '--hash-dim', '16'],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  const client = new ForageClient(BASE);
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    if (await client.health()) return;
    await sleep(250);
  }
  throw new Error('service did not come up');
}, 40_000);

afterAll(() => {
  server?.kill('SIGTERM');
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

async function hoverAndWaitForTooltip(bench: Workbench, pid: number): Promise<HTMLElement> {
  const pos = bench.layer.screenOf(pid);
  const canvas = document.querySelector('#map') as HTMLCanvasElement;
  canvas.dispatchEvent(
    new MouseEvent('pointermove', { clientX: pos.x, clientY: pos.y, bubbles: true }),
  );
  expect(bench.tooltip.activePointId).toBe(pid);
  const deadline = Date.now() + 5_000;
  while (Date.now() < deadline) {
    if (
      bench.tooltip.visible &&
      bench.tooltip.element.querySelector('button[data-action]')
    ) {
      return bench.tooltip.element;
    }
    await sleep(25);
  }
  throw new Error('tooltip never opened');
}

function clickAction(tooltip: HTMLElement, action: string): void {
  const btn = tooltip.querySelector(`button[data-action="${action}"]`);
  expect(btn, `button ${action} present`).toBeTruthy();
  (btn as HTMLButtonElement).click();
}

async function settle(bench: Workbench): Promise<void> {
  await bench.queue.settle();
  await sleep(50);
}

describe('feedback round trip against a live service', () => {
  it('bookmarks recolor dots, refill the batch, and match service utility', async () => {
    const client = new ForageClient(BASE);
    const datasetId = await client.uploadDataset(datasetCsv, 'csv');
    const els = dom();
    const bench = await Workbench.create(els, {
      baseUrl: BASE,
      datasetId,
      policy: { kind: 'one_step' },
      batchSize: 10,
      context: recordingContext(),
      flushIntervalMs: 300,
    });
    expect(bench.layer.size).toBe(400);
    expect(bench.suggestions).toEqual([]); // cold start: no clues yet

    // first bookmark comes unassisted (hover a default dot)
    const firstPid = 0;
    let tooltip = await hoverAndWaitForTooltip(bench, firstPid);
    expect(
      [...tooltip.querySelectorAll('button[data-action]')].map(
        (b) => (b as HTMLElement).dataset.action,
      ),
    ).toEqual(['bookmark_add']); // default dots only offer add
    clickAction(tooltip, 'bookmark_add');
    await settle(bench);

    // batch of 10 arrived with the POST response and is rendered
    expect(bench.suggestions).toHaveLength(10);
    for (const s of bench.suggestions) {
      expect(bench.layer.stateOf(s.point_id)).toBe('suggested');
    }
    expect(bench.layer.stateOf(firstPid)).toBe('bookmarked');

    // bookmark a *suggested* dot via its tooltip
    const target = bench.suggestions[0].point_id;
    tooltip = await hoverAndWaitForTooltip(bench, target);
    expect(
      [...tooltip.querySelectorAll('button[data-action]')].map(
        (b) => (b as HTMLElement).dataset.action,
      ),
    ).toEqual(['bookmark_add', 'irrelevant_flag']);
    clickAction(tooltip, 'bookmark_add');
    await settle(bench);

    // the dot recolored and the batch refilled to 10 without it
    expect(bench.layer.stateOf(target)).toBe('bookmarked');
    expect(bench.suggestions).toHaveLength(10);
    expect(bench.suggestions.map((s) => s.point_id)).not.toContain(target);
    const suggestedNow = bench.suggestions.map((s) => s.point_id);
    for (const pid of suggestedNow) {
      expect(bench.layer.stateOf(pid)).toBe('suggested');
    }

    // rendered batch equals the service's own view after the flush
    const serverBatch = await client.suggestions(bench.session.session_id);
    expect(suggestedNow).toEqual(serverBatch.map((s) => s.point_id));

    // sidebar count equals the service's utility
    const metrics = await client.metrics(bench.session.session_id);
    expect(metrics.utility).toBe(2);
    expect(els.sidebarCount.textContent).toBe('2');
    expect(els.sidebarList.querySelectorAll('li')).toHaveLength(2);

    // removing from the sidebar reverts the dot and drops the label
    const removeBtn = els.sidebarList.querySelector(
      `li[data-point-id="${target}"] button[data-action="bookmark_remove"]`,
    ) as HTMLButtonElement;
    removeBtn.click();
    await settle(bench);
    expect(bench.layer.stateOf(target)).not.toBe('bookmarked');
    const after = await client.metrics(bench.session.session_id);
    expect(after.utility).toBe(1);
    expect(els.sidebarCount.textContent).toBe('1');

    // flagging a suggestion labels it irrelevant and re-fills the batch
    const flagged = bench.suggestions[1].point_id;
    tooltip = await hoverAndWaitForTooltip(bench, flagged);
    clickAction(tooltip, 'irrelevant_flag');
    await settle(bench);
    expect(bench.suggestions.map((s) => s.point_id)).not.toContain(flagged);
    expect(bench.suggestions).toHaveLength(10);
    expect(bench.layer.stateOf(flagged)).toBe('default');

    await bench.exit();
    const ended = await client.metrics(bench.session.session_id);
    expect(ended.closed).toBe(true);
  }, 60_000);
});
