/** Typed client for the annotation service HTTP API. */

import type {
  AnnotationPayload,
  BatchPayload,
  ProgressPayload,
  SubmitAck,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get isDuplicate(): boolean {
    return this.status === 409;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response.json();
  }

  async register(): Promise<string> {
    const body = (await this.request("/api/register", { method: "POST" })) as {
      worker_token: string;
    };
    return body.worker_token;
  }

  async nextBatch(token: string): Promise<BatchPayload | null> {
    const body = (await this.request("/api/batch/next", {
      headers: { "X-Worker-Token": token },
    })) as { batch: BatchPayload | null };
    return body.batch;
  }

  async submit(token: string, payload: AnnotationPayload): Promise<SubmitAck> {
    return (await this.request("/api/annotation", {
      method: "POST",
      headers: { "X-Worker-Token": token, "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    })) as SubmitAck;
  }

  async progress(): Promise<ProgressPayload> {
    return (await this.request("/api/progress")) as ProgressPayload;
  }
}
