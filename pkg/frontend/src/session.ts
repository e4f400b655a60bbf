// Session flow, independent of the DOM so it can run headless in tests.
//
// Loop: fetch the next unanswered trial, present it until both images are
// ready, start the response clock only then, collect the forced choice,
// submit with retry (server dedupes), repeat until the server reports the
// session complete. Refreshing or crashing mid-session is safe because
// the next fetch lands on the same unanswered trial.

import { ApiError, Choice, StudyApi, TrialPayload } from "./api.js";

export type PresentOutcome = "ready" | "load-failed";

export interface TrialPresenter {
  // resolves once both images are fully displayable (or failed)
  presentTrial(trial: TrialPayload): Promise<PresentOutcome>;
  // called only after presentTrial resolved "ready"; one choice per call
  awaitChoice(trial: TrialPayload): Promise<Choice>;
  // the report control: surfaces a load failure, then the trial retries;
  // the protocol has no skip, so reporting never advances the session
  reportLoadFailure(trial: TrialPayload, attempt: number): void;
  showCompletion(completed: number): void;
}

export interface SessionResult {
  completed: number;
  votesSubmitted: number;
  duplicatesAbsorbed: number;
}

export interface SessionOptions {
  maxSubmitRetries?: number;
  retryDelayMs?: number;
  now?: () => number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class SessionRunner {
  private readonly maxSubmitRetries: number;
  private readonly retryDelayMs: number;
  private readonly now: () => number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly api: StudyApi,
    private readonly presenter: TrialPresenter,
    options: SessionOptions = {},
  ) {
    this.maxSubmitRetries = options.maxSubmitRetries ?? 5;
    this.retryDelayMs = options.retryDelayMs ?? 250;
    this.now = options.now ?? (() => performance.now());
    this.sleep = options.sleep ?? defaultSleep;
  }

  async run(participantId: string): Promise<SessionResult> {
    let votesSubmitted = 0;
    let duplicatesAbsorbed = 0;
    for (;;) {
      const next = await this.api.nextTrial(participantId);
      if (next.done) {
        this.presenter.showCompletion(next.completed);
        return { completed: next.completed, votesSubmitted, duplicatesAbsorbed };
      }
      await this.presentUntilReady(next);
      const enabledAt = this.now();
      const choice = await this.presenter.awaitChoice(next);
      const responseMs = this.now() - enabledAt;
      const outcome = await this.submitWithRetry(next.trial_id, choice, responseMs);
      if (outcome === "ok") votesSubmitted += 1;
      else duplicatesAbsorbed += 1;
    }
  }

  private async presentUntilReady(trial: TrialPayload): Promise<void> {
    for (let attempt = 1; ; attempt += 1) {
      const outcome = await this.presenter.presentTrial(trial);
      if (outcome === "ready") return;
      this.presenter.reportLoadFailure(trial, attempt);
      await this.sleep(this.retryDelayMs);
    }
  }

  private async submitWithRetry(trialId: string, choice: Choice, responseMs: number) {
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.maxSubmitRetries; attempt += 1) {
      try {
        return await this.api.submitVote(trialId, choice, responseMs);
      } catch (err) {
        // client errors other than the absorbed 409 will not heal on retry
        if (err instanceof ApiError && err.status !== undefined && err.status < 500) {
          throw err;
        }
        lastError = err;
        await this.sleep(this.retryDelayMs);
      }
    }
    throw lastError;
  }
}
