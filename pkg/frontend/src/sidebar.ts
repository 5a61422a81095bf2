/** Bookmark sidebar: the discovered list, a live count, and per-entry
 * remove buttons mirroring the tooltip's remove action. */

export interface SidebarEntry {
  id: number;
  text: string;
}

export class BookmarkSidebar {
  constructor(
    private readonly listEl: HTMLElement,
    private readonly countEl: HTMLElement,
    private readonly onRemove: (pointId: number) => void,
  ) {}

  get count(): number {
    return Number(this.countEl.textContent ?? '0');
  }

  update(entries: SidebarEntry[], utility: number, inputsEnabled: boolean): void {
    this.countEl.textContent = String(utility);
    const doc = this.listEl.ownerDocument;
    const items = entries.map((entry) => {
      const li = doc.createElement('li');
      li.dataset.pointId = String(entry.id);
      const span = doc.createElement('span');
      span.textContent = entry.text;
      li.appendChild(span);
      if (inputsEnabled) {
        const btn = doc.createElement('button');
        btn.textContent = 'remove bookmark';
        btn.dataset.action = 'bookmark_remove';
        btn.addEventListener('click', () => this.onRemove(entry.id));
        li.appendChild(btn);
      }
      return li;
    });
    this.listEl.replaceChildren(...items);
  }
}
