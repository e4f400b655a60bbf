// Typed client for the study service HTTP API. The server is the single
// source of truth: the client never stores trial state beyond the
// participant token in the URL.

export interface TrialPayload {
  done: false;
  trial_id: string;
  left_image: string;
  right_image: string;
  index: number;
  total: number;
}

export interface DonePayload {
  done: true;
  completed: number;
}

export type NextTrialResponse = TrialPayload | DonePayload;

export type Choice = "left" | "right";

export type VoteOutcome = "ok" | "duplicate";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export class StudyApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async nextTrial(participantId: string): Promise<NextTrialResponse> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/session/${encodeURIComponent(participantId)}/trial`,
    );
    if (!resp.ok) {
      throw new ApiError(`trial fetch failed: ${resp.status}`, resp.status);
    }
    return (await resp.json()) as NextTrialResponse;
  }

  // A 409 means the server already holds this vote (double click, retry
  // after a dropped response); callers treat it as success.
  async submitVote(trialId: string, choice: Choice, responseMs: number): Promise<VoteOutcome> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/vote`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ trial_id: trialId, choice, response_ms: responseMs }),
    });
    if (resp.status === 409) return "duplicate";
    if (!resp.ok) {
      throw new ApiError(`vote failed: ${resp.status}`, resp.status);
    }
    return "ok";
  }
}
