import { ApiError } from "./client.js";
import type { HealthView, RunMode, RunResults, RunStarted } from "./types.js";

// what the poller actually needs from the client
export interface ResultsApi {
  health(): Promise<HealthView>;
  startRun(subtasks: string[], mode?: RunMode): Promise<RunStarted>;
  results(runId: string): Promise<RunResults>;
}

export interface PanelState {
  runId: string | null;
  run: RunResults | null;
  /** highest engine seq observed from any response */
  latestSeq: number;
  /** the displayed results were solved under an older seq than we know about */
  stale: boolean;
  error: string | null;
  polls: number;
}

/*
 * Drives the results panel.  One poll is one GET of the run's results;
 * the server re-solves live, so a single poll after any change is enough
 * to catch up.  Between a mutation and the next poll the panel keeps the
 * old numbers and flips `stale` so the reader knows they are looking at
 * history.
 */
export class ResultsPoller {
  readonly state: PanelState = {
    runId: null,
    run: null,
    latestSeq: 0,
    stale: false,
    error: null,
    polls: 0,
  };

  constructor(
    private readonly client: ResultsApi,
    readonly intervalMs = 5000,
  ) {}

  private recompute(): void {
    this.state.stale =
      this.state.run !== null && this.state.run.seq < this.state.latestSeq;
  }

  /** Record a seq from a mutation done outside the poll loop. */
  noteSeq(seq: number | null): void {
    if (seq !== null && seq > this.state.latestSeq) {
      this.state.latestSeq = seq;
    }
    this.recompute();
  }

  async start(subtasks: string[], mode: RunMode = "DryRun"): Promise<string> {
    const started = await this.client.startRun(subtasks, mode);
    this.state.runId = started.run_id;
    this.noteSeq(started.seq);
    await this.poll();
    return started.run_id;
  }

  async poll(): Promise<void> {
    this.state.polls += 1;
    if (this.state.runId === null) {
      // nothing running yet; still track seq so edits show up as pending
      try {
        const health = await this.client.health();
        this.noteSeq(health.seq);
        this.state.error = null;
      } catch (err) {
        this.state.error = String(err instanceof Error ? err.message : err);
      }
      return;
    }
    try {
      const run = await this.client.results(this.state.runId);
      this.state.run = run;
      this.state.error = null;
      this.noteSeq(run.seq);
    } catch (err) {
      // keep the last good numbers on screen, flag the failure
      this.state.error =
        err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
      this.recompute();
    }
  }

  /**
   * Hook the poll loop to a scheduler.  The default signature matches
   * window.setInterval; tests pass a fake and fire ticks by hand.
   */
  attach(
    schedule: (fn: () => void, ms: number) => number = (fn, ms) =>
      setInterval(fn, ms) as unknown as number,
  ): number {
    return schedule(() => {
      void this.poll();
    }, this.intervalMs);
  }
}
