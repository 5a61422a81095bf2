/** Browser entry point: read the base URL / dataset / session from
 * query parameters and boot the workbench. */

import { Workbench } from './app.js';

function required(el: Element | null, what: string): HTMLElement {
  if (!el) throw new Error(`missing element: ${what}`);
  return el as HTMLElement;
}

export async function boot(doc: Document = document): Promise<Workbench | null> {
  const params = new URLSearchParams(doc.defaultView?.location.search ?? '');
  const datasetId = params.get('dataset');
  const status = required(doc.querySelector('#status'), '#status');
  if (!datasetId) {
    status.textContent =
      'missing ?dataset=<id> - upload one via POST /datasets, then reload';
    return null;
  }
  const bench = await Workbench.create(
    {
      canvas: required(doc.querySelector('#map'), '#map') as HTMLCanvasElement,
      tooltipHost: required(doc.querySelector('#map-wrap'), '#map-wrap'),
      sidebarList: required(doc.querySelector('#bookmark-list'), '#bookmark-list'),
      sidebarCount: required(doc.querySelector('#bookmark-count'), '#bookmark-count'),
      timerEl: required(doc.querySelector('#timer'), '#timer'),
      exitButton: required(doc.querySelector('#exit'), '#exit') as HTMLButtonElement,
      statusEl: status,
    },
    {
      baseUrl: params.get('base') ?? '',
      datasetId,
      sessionId: params.get('session') ?? undefined,
      policy: { kind: params.get('policy') ?? 'one_step' },
      batchSize: Number(params.get('batch') ?? '10'),
      budgetMs: Number(params.get('budget') ?? '600000'),
    },
  );
  status.textContent = `session ${bench.session.session_id}`;
  return bench;
}

if (typeof document !== 'undefined' && document.querySelector('#map')) {
  void boot();
}
