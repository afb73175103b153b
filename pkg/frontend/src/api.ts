/** Thin typed client for the annotation service HTTP API. */

import type {
  Batch,
  PrescreenItem,
  PrescreenResult,
  SubmitRequest,
  SubmitResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, String(body.detail ?? response.statusText));
    }
    return body as T;
  }

  prescreenItems(): Promise<{ items: PrescreenItem[] }> {
    return this.request("/prescreen");
  }

  prescreen(annotatorId: string, answers: string[]): Promise<PrescreenResult> {
    return this.request("/prescreen", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, answers }),
    });
  }

  requestBatch(annotatorId: string): Promise<Batch> {
    return this.request(`/batch?annotator_id=${encodeURIComponent(annotatorId)}`);
  }

  submit(payload: SubmitRequest): Promise<SubmitResponse> {
    return this.request("/submit", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  audioUrl(relative: string): string {
    return `${this.baseUrl}${relative}`;
  }
}
