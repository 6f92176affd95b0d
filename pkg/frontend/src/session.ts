// Client session state machine: one task at a time, a local annotation
// buffer, and per-task timing. DOM-free so it runs headless under tests;
// the canvas layer in main.ts is a thin adapter over this.
//
// Timing contract: the clock starts when the task's image is first rendered
// (markRendered) and stops at submit; the measured duration rides along in
// the submission but never replaces the server's model-time ledger.

import { ApiError } from "./api.js";
import { boxInsideImage } from "./coords.js";
import type { AnnotationTask, Box, Point, RunStatus, SubmissionResult } from "./types.js";

/** The slice of the service client the session needs (structural, so tests
 * can substitute a fake). */
export interface AnnotationApi {
  tasks(runId: string, opts?: { kind?: string; limit?: number; waitMs?: number }): Promise<AnnotationTask[]>;
  submit(
    runId: string,
    taskId: string,
    payload: { clicks?: Point[]; boxes?: Box[] },
    durationMs: number,
    annotatorId?: string,
  ): Promise<SubmissionResult>;
  status(runId: string): Promise<RunStatus>;
}

export interface SessionOptions {
  now?: () => number;
  pollWaitMs?: number;
}

export class AnnotationSession {
  readonly runId: string;

  current: AnnotationTask | null = null;
  queue: AnnotationTask[] = [];
  clicks: Point[] = [];
  boxes: Box[] = [];
  status: RunStatus | null = null;
  lastError: string | null = null;
  submittedCount = 0;

  private renderedAt: number | null = null;
  private readonly now: () => number;
  private readonly pollWaitMs: number;

  constructor(
    private api: AnnotationApi,
    runId: string,
    opts: SessionOptions = {},
  ) {
    this.runId = runId;
    this.now = opts.now ?? (() => Date.now());
    this.pollWaitMs = opts.pollWaitMs ?? 0;
  }

  get done(): boolean {
    return this.status?.phase === "done" || this.status?.phase === "failed";
  }

  /** Pull the pending queue and make its head the current task. Clears the
   * buffer only when the task actually changes. */
  async refreshQueue(): Promise<void> {
    const opts = this.pollWaitMs > 0 ? { waitMs: this.pollWaitMs } : {};
    this.queue = await this.api.tasks(this.runId, opts);
    const head = this.queue[0] ?? null;
    if (head?.task_id !== this.current?.task_id) {
      this.current = head;
      this.clearBuffer();
    }
  }

  /** Start the task clock; idempotent until the task changes. */
  markRendered(): void {
    if (this.renderedAt === null) this.renderedAt = this.now();
  }

  clearBuffer(): void {
    this.clicks = [];
    this.boxes = [];
    this.renderedAt = null;
    this.lastError = null;
  }

  addClick(p: Point): void {
    const task = this.requireTask("type1");
    const { width, height } = task.image;
    if (p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
      throw new Error(`click (${p.x}, ${p.y}) outside the ${width}x${height} image`);
    }
    this.clicks.push(p);
  }

  addBox(box: Box): void {
    const task = this.requireTask("type2");
    if (!boxInsideImage(box, task.image.width, task.image.height)) {
      throw new Error("box outside image bounds");
    }
    this.boxes.push(box);
  }

  undo(): void {
    if (!this.current) return;
    if (this.current.kind === "type1") this.clicks.pop();
    else this.boxes.pop();
  }

  /** Submit the buffer for the current task. On success the queue advances;
   * on 409/422 the error is surfaced and the buffer kept intact. */
  async submit(): Promise<boolean> {
    const task = this.current;
    if (!task) return false;
    const durationMs = this.renderedAt === null ? 0 : this.now() - this.renderedAt;
    const payload =
      task.kind === "type1" ? { clicks: [...this.clicks] } : { boxes: [...this.boxes] };
    try {
      const result = await this.api.submit(this.runId, task.task_id, payload, durationMs);
      this.submittedCount += 1;
      this.lastError = null;
      await this.refreshQueue();
      if (result.phase_advanced) await this.pollStatus();
      return true;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
        this.lastError = err.message;
        if (err.status === 409) await this.refreshQueue();
        return false;
      }
      throw err;
    }
  }

  async pollStatus(): Promise<RunStatus> {
    this.status = await this.api.status(this.runId);
    return this.status;
  }

  private requireTask(kind: "type1" | "type2"): AnnotationTask {
    if (!this.current) throw new Error("no active task");
    if (this.current.kind !== kind) {
      throw new Error(`buffer kind ${kind} does not match task kind ${this.current.kind}`);
    }
    return this.current;
  }
}

/** Drive a session until the run completes: answer every task with
 * `annotate`, polling between phases. Used by scripted/automated runs. */
export async function playUntilDone(
  session: AnnotationSession,
  annotate: (task: AnnotationTask, session: AnnotationSession) => void,
  opts: { maxSteps?: number; sleepMs?: number } = {},
): Promise<void> {
  const maxSteps = opts.maxSteps ?? 10_000;
  const sleepMs = opts.sleepMs ?? 20;
  for (let step = 0; step < maxSteps; step++) {
    await session.pollStatus();
    if (session.done) return;
    await session.refreshQueue();
    if (!session.current) {
      await new Promise((resolve) => setTimeout(resolve, sleepMs));
      continue;
    }
    session.markRendered();
    annotate(session.current, session);
    const ok = await session.submit();
    if (!ok && session.lastError) throw new Error(`submission rejected: ${session.lastError}`);
  }
  throw new Error("run did not complete within the step budget");
}
