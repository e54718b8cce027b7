import { ConnectionError } from './api.js';
import type { JobStatus, RunStarted } from './types.js';

/** The two calls the monitor needs; SceneClient satisfies this. */
export interface RunClient {
  startRun(): Promise<RunStarted>;
  jobStatus(): Promise<JobStatus>;
}

// Run launching and progress polling. The monitor POSTs /run at most once
// per start() call no matter how flaky the network gets afterwards: every
// retry path below goes through GET /jobs/current only, so a dropped
// connection mid-poll can never spawn a second run.

export type SleepFn = (ms: number) => Promise<void>;

const defaultSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export interface MonitorOptions {
  /** Delay between successful polls. */
  intervalMs?: number;
  /** First retry delay after a connection failure; doubles up to the cap. */
  backoffMs?: number;
  maxBackoffMs?: number;
  sleep?: SleepFn;
  /** Called with every job status the server reports. */
  onStatus?: (status: JobStatus) => void;
  /** Called with false when the server stops answering, true when it returns. */
  onConnection?: (up: boolean) => void;
}

export class RunMonitor {
  private readonly intervalMs: number;
  private readonly backoffMs: number;
  private readonly maxBackoffMs: number;
  private readonly sleep: SleepFn;
  private readonly onStatus: (status: JobStatus) => void;
  private readonly onConnection: (up: boolean) => void;
  private starting = false;

  constructor(
    private readonly client: RunClient,
    opts: MonitorOptions = {},
  ) {
    this.intervalMs = opts.intervalMs ?? 1000;
    this.backoffMs = opts.backoffMs ?? 1000;
    this.maxBackoffMs = opts.maxBackoffMs ?? 8000;
    this.sleep = opts.sleep ?? defaultSleep;
    this.onStatus = opts.onStatus ?? (() => {});
    this.onConnection = opts.onConnection ?? (() => {});
  }

  /**
   * POST /run exactly once. Re-entrant calls while the first POST is still
   * in flight are rejected locally instead of hitting the server again.
   */
  async start(): Promise<RunStarted> {
    if (this.starting) {
      throw new Error('a run request is already in flight');
    }
    this.starting = true;
    try {
      return await this.client.startRun();
    } finally {
      this.starting = false;
    }
  }

  /**
   * Poll GET /jobs/current until the job leaves the running state. Connection
   * failures retry with exponential backoff; they never re-POST the run.
   */
  async watch(): Promise<JobStatus> {
    let backoff = this.backoffMs;
    let up = true;
    for (;;) {
      let status: JobStatus;
      try {
        status = await this.client.jobStatus();
      } catch (err) {
        if (err instanceof ConnectionError) {
          if (up) {
            up = false;
            this.onConnection(false);
          }
          await this.sleep(backoff);
          backoff = Math.min(backoff * 2, this.maxBackoffMs);
          continue;
        }
        throw err;
      }
      if (!up) {
        up = true;
        this.onConnection(true);
      }
      backoff = this.backoffMs;
      this.onStatus(status);
      if (status.status !== 'running') {
        return status;
      }
      await this.sleep(this.intervalMs);
    }
  }

  /** Start a run and follow it to its terminal state. */
  async run(): Promise<JobStatus> {
    await this.start();
    return await this.watch();
  }
}

/** Human-readable label for the pipeline stage a job is in. */
export function stageLabel(status: JobStatus): string {
  switch (status.stage) {
    case 'stylize':
      return 'stylizing primitive views';
    case 'mesh':
      return 'generating mesh';
    case 'grids':
      return 'rendering reference views';
    case 'dataset':
      return 'updating dataset';
    case 'done':
      return 'done';
    default:
      return status.stage;
  }
}
