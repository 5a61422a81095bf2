/** Countdown of the remaining session budget (mm:ss). */

export class CountdownTimer {
  private handle: ReturnType<typeof setInterval> | null = null;
  private expired = false;

  constructor(
    private readonly el: HTMLElement,
    private readonly budgetMs: number,
    private readonly startedAt: number,
    private readonly onExpire: () => void,
    private readonly now: () => number = () => Date.now(),
  ) {}

  start(): void {
    this.tick();
    this.handle = setInterval(() => this.tick(), 250);
  }

  stop(): void {
    if (this.handle !== null) {
      clearInterval(this.handle);
      this.handle = null;
    }
  }

  private tick(): void {
    const left = Math.max(0, this.budgetMs - (this.now() - this.startedAt));
    const totalSeconds = Math.ceil(left / 1000);
    const mm = String(Math.floor(totalSeconds / 60)).padStart(2, '0');
    const ss = String(totalSeconds % 60).padStart(2, '0');
    this.el.textContent = `${mm}:${ss}`;
    if (left <= 0 && !this.expired) {
      this.expired = true;
      this.stop();
      this.onExpire();
    }
  }
}
