/**
 * Session flow state: register (or resume), fetch tasks, submit ratings.
 *
 * The session token is persisted client-side so a page refresh resumes at
 * the next undispensed task. Submissions are strictly sequential: a rating
 * must be acknowledged by the server before the next task is requested,
 * and an acknowledged rating is frozen locally and never mutated.
 */

import { ApiClient } from "./api.js";
import { RatingScores, RatingSubmission, TaskPayload, validateScores } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const DEFAULT_STORAGE_KEY = "sumlab.annotate.session";

export class AnnotationSession {
  private sessionId: string | null = null;
  private currentTask: TaskPayload | null = null;
  readonly submitted: RatingSubmission[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly storage: StorageLike,
    private readonly storageKey: string = DEFAULT_STORAGE_KEY,
  ) {}

  get id(): string | null {
    return this.sessionId;
  }

  get pendingTask(): TaskPayload | null {
    return this.currentTask;
  }

  /** Resume a stored session for this server, or register a fresh one. */
  async start(raterId: string): Promise<string> {
    const stored = this.storage.getItem(this.storageKey);
    if (stored) {
      const parsed = JSON.parse(stored) as { server: string; session_id: string };
      if (parsed.server === this.api.baseUrl && parsed.session_id) {
        this.sessionId = parsed.session_id;
        return this.sessionId;
      }
    }
    this.sessionId = await this.api.register(raterId);
    this.storage.setItem(this.storageKey, JSON.stringify({ server: this.api.baseUrl, session_id: this.sessionId }));
    return this.sessionId;
  }

  /** Fetch the next task; null means the session is complete. */
  async next(): Promise<TaskPayload | null> {
    if (!this.sessionId) throw new Error("session not started");
    const response = await this.api.nextTask(this.sessionId);
    this.currentTask = response.task;
    return response.task;
  }

  /**
   * Validate and submit scores for the current task. Resolves only after
   * the server acknowledges; on failure the task stays current so the form
   * can be corrected and resubmitted.
   */
  async submit(scores: Partial<RatingScores>): Promise<string> {
    if (!this.sessionId) throw new Error("session not started");
    if (!this.currentTask) throw new Error("no task is pending");
    const complete = validateScores(scores);
    const submission: RatingSubmission = {
      session_id: this.sessionId,
      task_id: this.currentTask.task_id,
      ...complete,
    };
    const recordId = await this.api.submitRating(submission);
    this.submitted.push(Object.freeze({ ...submission }));
    this.currentTask = null;
    return recordId;
  }

  /** Drop the stored token (used when the server no longer knows it). */
  reset(): void {
    this.storage.removeItem(this.storageKey);
    this.sessionId = null;
    this.currentTask = null;
  }
}
