// Thin typed client for the annotation service. All state authority lives
// server-side; this never caches or mutates anything locally.

import type { AnnotationTask, Box, Point, RunStatus, SubmissionResult } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let message = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) message = body.error;
    } catch {
      // non-JSON error body; keep the status message
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as T;
}

export class ServiceApi {
  constructor(private baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async createRun(config: unknown, manifest: unknown): Promise<string> {
    const body = await asJson<{ run_id: string }>(
      await fetch(`${this.baseUrl}/runs`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ config, manifest }),
      }),
    );
    return body.run_id;
  }

  async tasks(runId: string, opts: { kind?: string; limit?: number; waitMs?: number } = {}): Promise<AnnotationTask[]> {
    const params = new URLSearchParams();
    if (opts.kind) params.set("kind", opts.kind);
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    if (opts.waitMs !== undefined) params.set("wait_ms", String(opts.waitMs));
    const query = params.toString();
    const body = await asJson<{ tasks: AnnotationTask[] }>(
      await fetch(`${this.baseUrl}/runs/${runId}/tasks${query ? "?" + query : ""}`),
    );
    return body.tasks;
  }

  async submit(
    runId: string,
    taskId: string,
    payload: { clicks?: Point[]; boxes?: Box[] },
    durationMs: number,
    annotatorId = "browser",
  ): Promise<SubmissionResult> {
    return asJson<SubmissionResult>(
      await fetch(`${this.baseUrl}/runs/${runId}/annotations`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          task_id: taskId,
          ...payload,
          duration_ms: durationMs,
          annotator_id: annotatorId,
        }),
      }),
    );
  }

  async status(runId: string): Promise<RunStatus> {
    return asJson<RunStatus>(await fetch(`${this.baseUrl}/runs/${runId}/status`));
  }

  async runLog(runId: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/runs/${runId}/log`);
    if (!response.ok) throw new ApiError(response.status, `HTTP ${response.status}`);
    return response.text();
  }

  imageUrl(runId: string, imageId: string): string {
    return `${this.baseUrl}/runs/${runId}/images/${imageId}`;
  }
}
