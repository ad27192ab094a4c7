/**
 * Typed HTTP client for the annotation service.
 *
 * Network failures and 5xx responses are retried with backoff and reported
 * through onRetry so the UI can show a reconnecting notice; 4xx responses
 * surface immediately as ApiError (the server said no, retrying is wrong).
 */

import {
  NextTaskResponse,
  RatingSubmission,
  asAck,
  asNextTaskResponse,
  asSessionResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
  }
}

export interface ApiOptions {
  fetchFn?: typeof fetch;
  retries?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onRetry?: (attempt: number, error: Error) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  private readonly fetchFn: typeof fetch;
  private readonly retries: number;
  private readonly backoffMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly onRetry?: (attempt: number, error: Error) => void;

  constructor(
    readonly baseUrl: string,
    options: ApiOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.retries = options.retries ?? 3;
    this.backoffMs = options.backoffMs ?? 500;
    this.sleep = options.sleep ?? defaultSleep;
    this.onRetry = options.onRetry;
  }

  async register(raterId: string): Promise<string> {
    const json = await this.request("POST", "/sessions", { rater_id: raterId });
    return asSessionResponse(json);
  }

  async nextTask(sessionId: string): Promise<NextTaskResponse> {
    const json = await this.request("GET", `/tasks/next?session=${encodeURIComponent(sessionId)}`);
    return asNextTaskResponse(json);
  }

  async submitRating(submission: RatingSubmission): Promise<string> {
    const json = await this.request("POST", "/ratings", submission);
    return asAck(json);
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const url = this.baseUrl.replace(/\/$/, "") + path;
    let attempt = 0;
    for (;;) {
      let response: Response;
      try {
        response = await this.fetchFn(url, {
          method,
          headers: body === undefined ? {} : { "content-type": "application/json" },
          body: body === undefined ? undefined : JSON.stringify(body),
        });
      } catch (error) {
        // fetch rejects only on network-level failures: always retryable
        if (attempt >= this.retries) {
          throw new ApiError(`network failure after ${attempt + 1} attempts: ${String(error)}`);
        }
        attempt += 1;
        this.onRetry?.(attempt, error instanceof Error ? error : new Error(String(error)));
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
        continue;
      }

      if (response.status >= 500 && attempt < this.retries) {
        attempt += 1;
        this.onRetry?.(attempt, new ApiError(`server error ${response.status}`, response.status));
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
        continue;
      }
      if (!response.ok) {
        const detail = await response.text().catch(() => "");
        throw new ApiError(`${method} ${path} failed (${response.status}): ${detail}`, response.status);
      }
      return response.json();
    }
  }
}
