/**
 * Teacher-side replay player.  Pacing runs client-side from the pure
 * schedule (delay before event i = (ts_i - ts_{i-1}) / speed, first delay
 * 0); the server only answers reconstruct_at for the scrubber.
 */

export interface ScheduleEntry {
  delayMs: number;
  index: number;
}

export function replaySchedule(
  timestamps: number[],
  speed: number,
): ScheduleEntry[] {
  if (!(speed > 0)) throw new Error(`speed must be positive, got ${speed}`);
  return timestamps.map((ts, i) => ({
    delayMs: i === 0 ? 0 : Math.round((ts - timestamps[i - 1]) / speed),
    index: i,
  }));
}

export type TimerFn = (cb: () => void, delayMs: number) => unknown;
export type CancelFn = (handle: unknown) => void;

export interface ReplaySource {
  /** Event timestamps, in log order. */
  timestamps(): Promise<number[]>;
  /** Construction JSON after the first `index` events. */
  reconstructAt(index: number): Promise<string>;
}

export class ReplayPlayer {
  position = 0;
  speed: 0.5 | 1 | 2 | 4 | 8 = 1;
  playing = false;
  onFrame: ((index: number, construction: string) => void) | null = null;
  private ts: number[] = [];
  private timerHandle: unknown = null;

  constructor(
    private source: ReplaySource,
    private setTimer: TimerFn = (cb, d) => setTimeout(cb, d),
    private cancelTimer: CancelFn = (h) => clearTimeout(h as number),
  ) {}

  async load(): Promise<void> {
    this.ts = await this.source.timestamps();
    this.position = 0;
  }

  get eventCount(): number {
    return this.ts.length;
  }

  get atEnd(): boolean {
    return this.position >= this.ts.length;
  }

  /** Advance one event; resolves with the reconstruction it produced. */
  async step(): Promise<string> {
    if (this.atEnd) throw new Error("already at the end of the log");
    this.position += 1;
    const construction = await this.source.reconstructAt(this.position);
    this.onFrame?.(this.position, construction);
    return construction;
  }

  /** Jump the scrubber to an absolute position. */
  async seek(index: number): Promise<string> {
    if (index < 0 || index > this.ts.length) {
      throw new Error(`position ${index} out of range`);
    }
    this.position = index;
    const construction = await this.source.reconstructAt(index);
    this.onFrame?.(this.position, construction);
    return construction;
  }

  play(): void {
    if (this.playing || this.atEnd) return;
    this.playing = true;
    this.scheduleNext();
  }

  pause(): void {
    this.playing = false;
    if (this.timerHandle !== null) {
      this.cancelTimer(this.timerHandle);
      this.timerHandle = null;
    }
  }

  setSpeed(speed: 0.5 | 1 | 2 | 4 | 8): void {
    this.speed = speed;
    if (this.playing) {
      this.pause();
      this.play();
    }
  }

  private scheduleNext(): void {
    if (!this.playing || this.atEnd) {
      this.playing = false;
      return;
    }
    const sched = replaySchedule(this.ts, this.speed);
    const delay = sched[this.position].delayMs;
    this.timerHandle = this.setTimer(() => {
      this.timerHandle = null;
      void this.step().then(() => this.scheduleNext());
    }, delay);
  }
}
