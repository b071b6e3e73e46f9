/** Hidden page timer: starts on first render, read once at submit. Uses the
 * monotonic clock so wall-clock adjustments never distort elapsed times. */

export class PageTimer {
  private readonly startedAt: number;

  constructor(private readonly now: () => number = () => performance.now()) {
    this.startedAt = this.now();
  }

  elapsedMs(): number {
    return Math.max(0, Math.round(this.now() - this.startedAt));
  }
}
