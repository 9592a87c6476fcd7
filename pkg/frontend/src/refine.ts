// The refinement loop: validate edits, push the config, trigger a run,
// poll status, and on success swap the previous result into the
// comparison slot so before/after stays visible.

import type { ApiClient, FieldError, PipelineConfig, RunStatus, TracksDoc } from "./api.js";
import { validateConfig } from "./configForm.js";

export interface RefineOutcome {
  ok: boolean;
  errors?: FieldError[];
  message?: string;
}

export interface RefineEvents {
  onStatus?: (status: RunStatus) => void;
  pollMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class RefineController {
  tracks: TracksDoc | null = null;
  comparison: TracksDoc | null = null;

  constructor(
    private api: ApiClient,
    private events: RefineEvents = {},
  ) {}

  async loadInitial(): Promise<void> {
    this.tracks = await this.api.tracks();
  }

  async refine(config: PipelineConfig): Promise<RefineOutcome> {
    const local = validateConfig(config);
    if (local.length > 0) {
      return { ok: false, errors: local }; // nothing is sent
    }
    const put = await this.api.putConfig(config);
    if (!put.ok) {
      return { ok: false, errors: put.errors };
    }
    const run = await this.api.startRun();
    if (!run.accepted) {
      return { ok: false, message: run.message };
    }
    const sleep = this.events.sleep ?? defaultSleep;
    const pollMs = this.events.pollMs ?? 250;
    for (;;) {
      const status = await this.api.status();
      this.events.onStatus?.(status);
      if (status.state === "failed") {
        return { ok: false, message: status.message ?? "run failed" };
      }
      if (status.state === "idle" && status.manifest) {
        break;
      }
      await sleep(pollMs);
    }
    this.comparison = this.tracks; // previous result becomes the ghost
    this.tracks = await this.api.tracks();
    return { ok: true };
  }
}
