/** Canvas dot layer: screen projection, uniform-grid hit testing, and
 * partial redraw of state changes.
 *
 * Dots live on one layer (no per-dot DOM elements) so thousands stay
 * interactive; hit testing walks the 3x3 grid neighborhood around the
 * pointer. Rendering goes through a minimal context interface so tests
 * can record draw calls without a real canvas.
 */

import { DOT_COLORS, type DotVisualState, type PointRecord } from './types.js';

export interface DrawContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface DotLayerOptions {
  width: number;
  height: number;
  padding?: number;
  radius?: number;
  hitRadius?: number;
}

interface Dot {
  id: number;
  sx: number;
  sy: number;
  state: DotVisualState;
}

const STATE_Z: Record<DotVisualState, number> = { default: 0, suggested: 1, bookmarked: 2 };

export class DotLayer {
  readonly width: number;
  readonly height: number;
  readonly radius: number;
  readonly hitRadius: number;

  private dots: Dot[] = [];
  private byId = new Map<number, Dot>();
  private cellSize: number;
  private cols: number;
  private rows: number;
  private grid: number[][] = []; // cell -> indexes into dots

  constructor(points: PointRecord[], opts: DotLayerOptions) {
    this.width = opts.width;
    this.height = opts.height;
    this.radius = opts.radius ?? 3;
    this.hitRadius = opts.hitRadius ?? Math.max(6, this.radius + 3);
    const padding = opts.padding ?? 12;

    let minX = Infinity;
    let maxX = -Infinity;
    let minY = Infinity;
    let maxY = -Infinity;
    for (const p of points) {
      minX = Math.min(minX, p.x);
      maxX = Math.max(maxX, p.x);
      minY = Math.min(minY, p.y);
      maxY = Math.max(maxY, p.y);
    }
    const spanX = maxX - minX || 1;
    const spanY = maxY - minY || 1;
    const sx = (this.width - 2 * padding) / spanX;
    const sy = (this.height - 2 * padding) / spanY;
    for (const p of points) {
      this.dots.push({
        id: p.id,
        sx: padding + (p.x - minX) * sx,
        // screen y grows downward; keep data north up
        sy: this.height - padding - (p.y - minY) * sy,
        state: 'default',
      });
    }
    this.dots.sort((a, b) => a.id - b.id);
    for (const d of this.dots) this.byId.set(d.id, d);

    this.cellSize = Math.max(16, this.hitRadius * 2);
    this.cols = Math.max(1, Math.ceil(this.width / this.cellSize));
    this.rows = Math.max(1, Math.ceil(this.height / this.cellSize));
    this.grid = Array.from({ length: this.cols * this.rows }, () => []);
    this.dots.forEach((d, i) => {
      this.grid[this.cellOf(d.sx, d.sy)].push(i);
    });
  }

  get size(): number {
    return this.dots.length;
  }

  private cellOf(x: number, y: number): number {
    const col = Math.min(this.cols - 1, Math.max(0, Math.floor(x / this.cellSize)));
    const row = Math.min(this.rows - 1, Math.max(0, Math.floor(y / this.cellSize)));
    return row * this.cols + col;
  }

  screenOf(id: number): { x: number; y: number } {
    const d = this.byId.get(id);
    if (!d) throw new Error(`unknown dot ${id}`);
    return { x: d.sx, y: d.sy };
  }

  stateOf(id: number): DotVisualState {
    const d = this.byId.get(id);
    if (!d) throw new Error(`unknown dot ${id}`);
    return d.state;
  }

  /** Nearest dot within the hit radius; distance ties go to the lower id. */
  hitTest(x: number, y: number): number | null {
    const col = Math.floor(x / this.cellSize);
    const row = Math.floor(y / this.cellSize);
    const r2 = this.hitRadius * this.hitRadius;
    let best: Dot | null = null;
    let bestD2 = Infinity;
    for (let dr = -1; dr <= 1; dr++) {
      const rr = row + dr;
      if (rr < 0 || rr >= this.rows) continue;
      for (let dc = -1; dc <= 1; dc++) {
        const cc = col + dc;
        if (cc < 0 || cc >= this.cols) continue;
        for (const i of this.grid[rr * this.cols + cc]) {
          const d = this.dots[i];
          const dx = d.sx - x;
          const dy = d.sy - y;
          const d2 = dx * dx + dy * dy;
          if (d2 > r2) continue;
          if (d2 < bestD2 || (d2 === bestD2 && best !== null && d.id < best.id)) {
            best = d;
            bestD2 = d2;
          }
        }
      }
    }
    return best ? best.id : null;
  }

  /** Replace the visual states from the latest service response; all
   * ids outside the two sets revert to default. Returns changed ids. */
  setStates(suggested: Iterable<number>, bookmarked: Iterable<number>): number[] {
    const want = new Map<number, DotVisualState>();
    for (const id of suggested) want.set(id, 'suggested');
    for (const id of bookmarked) want.set(id, 'bookmarked');
    const changed: number[] = [];
    for (const d of this.dots) {
      const next = want.get(d.id) ?? 'default';
      if (next !== d.state) {
        d.state = next;
        changed.push(d.id);
      }
    }
    return changed;
  }

  renderAll(ctx: DrawContext): void {
    ctx.clearRect(0, 0, this.width, this.height);
    // draw default dots first so highlighted states stay on top
    for (const z of [0, 1, 2]) {
      for (const d of this.dots) {
        if (STATE_Z[d.state] === z) this.drawDot(ctx, d);
      }
    }
  }

  /** Repaint only the regions around the given dots. */
  renderChanged(ctx: DrawContext, ids: number[]): void {
    const pad = this.radius + 2;
    const repaint = new Map<number, Dot>();
    for (const id of ids) {
      const d = this.byId.get(id);
      if (!d) continue;
      ctx.clearRect(d.sx - pad, d.sy - pad, 2 * pad, 2 * pad);
      for (const other of this.dotsNear(d.sx, d.sy, 2 * pad + this.radius)) {
        repaint.set(other.id, other);
      }
    }
    const order = [...repaint.values()].sort(
      (a, b) => STATE_Z[a.state] - STATE_Z[b.state] || a.id - b.id,
    );
    for (const d of order) this.drawDot(ctx, d);
  }

  private *dotsNear(x: number, y: number, range: number): Iterable<Dot> {
    const c0 = Math.max(0, Math.floor((x - range) / this.cellSize));
    const c1 = Math.min(this.cols - 1, Math.floor((x + range) / this.cellSize));
    const r0 = Math.max(0, Math.floor((y - range) / this.cellSize));
    const r1 = Math.min(this.rows - 1, Math.floor((y + range) / this.cellSize));
    for (let rr = r0; rr <= r1; rr++) {
      for (let cc = c0; cc <= c1; cc++) {
        for (const i of this.grid[rr * this.cols + cc]) {
          const d = this.dots[i];
          if (Math.abs(d.sx - x) <= range && Math.abs(d.sy - y) <= range) yield d;
        }
      }
    }
  }

  private drawDot(ctx: DrawContext, d: Dot): void {
    ctx.fillStyle = DOT_COLORS[d.state];
    ctx.beginPath();
    ctx.arc(d.sx, d.sy, this.radius, 0, Math.PI * 2);
    ctx.fill();
  }
}
