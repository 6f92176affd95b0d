// Canvas annotation client. Thin adapter: all decisions live in
// AnnotationSession (session.ts) and the coordinate math in coords.ts;
// this file only wires DOM events and draws.

import { ServiceApi } from "./api.js";
import {
  ViewTransform,
  dragToBox,
  fitTransform,
  imageToScreen,
  screenToImage,
  zoomAt,
} from "./coords.js";
import { actionForKey } from "./keymap.js";
import { AnnotationSession } from "./session.js";
import type { Point } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

class CanvasClient {
  private canvas = $(`canvas`) as unknown as HTMLCanvasElement;
  private ctx = this.canvas.getContext("2d")!;
  private view: ViewTransform = { scale: 1, panX: 0, panY: 0 };
  private image: HTMLImageElement | null = null;
  private imageTaskId: string | null = null;
  private dragStart: Point | null = null;
  private dragNow: Point | null = null;
  private statusTimer: number | undefined;

  constructor(
    private api: ServiceApi,
    private session: AnnotationSession,
  ) {}

  async start(): Promise<void> {
    this.canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    this.canvas.addEventListener("mousemove", (e) => this.onMouseMove(e));
    this.canvas.addEventListener("mouseup", (e) => this.onMouseUp(e));
    this.canvas.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
    document.addEventListener("keydown", (e) => this.onKey(e));
    this.statusTimer = window.setInterval(() => this.refreshStatus(), 2000);
    await this.refreshStatus();
    await this.nextTask();
  }

  private async refreshStatus(): Promise<void> {
    try {
      const status = await this.session.pollStatus();
      const ledgerSeconds = Number(status.ledger["seconds_total"] ?? 0);
      const measured = status.measured_seconds.type1 + status.measured_seconds.type2;
      $("status").textContent =
        `episode ${status.episode} · phase ${status.phase} · ` +
        `pending ${status.pending_counts["type1"] ?? 0}+${status.pending_counts["type2"] ?? 0} · ` +
        `pools L${status.pools["labeled"]}/W${status.pools["weak"]}/U${status.pools["unlabeled"]} · ` +
        `model cost ${(ledgerSeconds / 3600).toFixed(3)} h · measured ${(measured / 3600).toFixed(3)} h · ` +
        `AP ${status.map_at_50 === null ? "n/a" : status.map_at_50.toFixed(3)}`;
      $("status").classList.remove("stale");
      if (this.session.done) {
        $("task").textContent = `run ${status.phase}`;
        this.canvas.style.pointerEvents = "none";
      }
    } catch {
      $("status").classList.add("stale");
    }
  }

  private async nextTask(): Promise<void> {
    await this.session.refreshQueue();
    const task = this.session.current;
    if (!task) {
      $("task").textContent = this.session.done ? "run finished" : "waiting for tasks...";
      this.image = null;
      this.draw();
      if (!this.session.done) window.setTimeout(() => this.nextTask(), 750);
      return;
    }
    $("task").textContent =
      `${task.kind === "type1" ? "click object centers" : "draw a box per marker"} — ` +
      `${task.image.id} (${this.session.queue.length} pending)`;
    if (this.imageTaskId !== task.task_id) {
      this.imageTaskId = task.task_id;
      this.loadImage(task.image.id, task.image.width, task.image.height);
    }
  }

  private loadImage(imageId: string, width: number, height: number): void {
    this.view = fitTransform(width, height, this.canvas.width, this.canvas.height);
    this.image = null;
    const img = new Image();
    img.onload = () => {
      this.image = img;
      this.session.markRendered();
      this.draw();
    };
    img.onerror = () => {
      // No raster available: annotate on the blank backdrop; timing still
      // starts at first render of the (empty) frame.
      this.image = null;
      this.session.markRendered();
      this.draw();
    };
    img.src = this.api.imageUrl(this.session.runId, imageId);
    this.draw();
  }

  private screenPoint(e: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  private onMouseDown(e: MouseEvent): void {
    const task = this.session.current;
    if (!task) return;
    const p = this.screenPoint(e);
    if (task.kind === "type1") {
      try {
        this.session.addClick(screenToImage(this.view, p));
      } catch (err) {
        this.flash(String(err));
      }
      this.draw();
    } else {
      this.dragStart = p;
      this.dragNow = p;
    }
  }

  private onMouseMove(e: MouseEvent): void {
    if (this.dragStart) {
      this.dragNow = this.screenPoint(e);
      this.draw();
    }
  }

  private onMouseUp(e: MouseEvent): void {
    const task = this.session.current;
    if (!task || task.kind !== "type2" || !this.dragStart) return;
    const a = screenToImage(this.view, this.dragStart);
    const b = screenToImage(this.view, this.screenPoint(e));
    this.dragStart = this.dragNow = null;
    const box = dragToBox(a, b, task.image.width, task.image.height);
    if (box) {
      this.session.addBox(box);
    }
    this.draw();
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.15 : 1 / 1.15;
    this.view = zoomAt(this.view, factor, this.screenPoint(e));
    this.draw();
  }

  private async onKey(e: KeyboardEvent): Promise<void> {
    const action = actionForKey(e.key);
    if (!action) return;
    e.preventDefault();
    if (action === "undo") {
      this.session.undo();
      this.draw();
    } else if (action === "submit") {
      const ok = await this.session.submit();
      if (!ok && this.session.lastError) this.flash(this.session.lastError);
      this.imageTaskId = null;
      await this.nextTask();
      await this.refreshStatus();
    } else if (action === "nextTask") {
      await this.nextTask();
    }
  }

  private flash(message: string): void {
    const el = $("error");
    el.textContent = message;
    window.setTimeout(() => {
      if (el.textContent === message) el.textContent = "";
    }, 4000);
  }

  private draw(): void {
    const { ctx, canvas, view } = this;
    const task = this.session.current;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!task) return;
    const { width, height } = task.image;
    const tl = imageToScreen(view, { x: 0, y: 0 });
    const br = imageToScreen(view, { x: width, y: height });
    ctx.fillStyle = "#1b1e24";
    ctx.fillRect(tl.x, tl.y, br.x - tl.x, br.y - tl.y);
    if (this.image) {
      ctx.drawImage(this.image, tl.x, tl.y, br.x - tl.x, br.y - tl.y);
    }
    ctx.strokeStyle = "#777";
    ctx.strokeRect(tl.x, tl.y, br.x - tl.x, br.y - tl.y);

    // Existing clicks (type2 guidance) as hollow markers.
    for (const c of task.existing_clicks) {
      const p = imageToScreen(view, c);
      ctx.strokeStyle = "#ffd54d";
      ctx.beginPath();
      ctx.arc(p.x, p.y, 6, 0, Math.PI * 2);
      ctx.stroke();
    }
    // Buffered clicks as filled markers.
    for (const c of this.session.clicks) {
      const p = imageToScreen(view, c);
      ctx.fillStyle = "#4dd0e1";
      ctx.beginPath();
      ctx.arc(p.x, p.y, 4, 0, Math.PI * 2);
      ctx.fill();
    }
    // Buffered boxes.
    ctx.strokeStyle = "#81c784";
    for (const b of this.session.boxes) {
      const p1 = imageToScreen(view, { x: b.x_min, y: b.y_min });
      const p2 = imageToScreen(view, { x: b.x_max, y: b.y_max });
      ctx.strokeRect(p1.x, p1.y, p2.x - p1.x, p2.y - p1.y);
    }
    // Live drag rectangle.
    if (this.dragStart && this.dragNow) {
      ctx.strokeStyle = "#e57373";
      ctx.strokeRect(
        this.dragStart.x,
        this.dragStart.y,
        this.dragNow.x - this.dragStart.x,
        this.dragNow.y - this.dragStart.y,
      );
    }
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? `${window.location.protocol}//${window.location.hostname}:9400`;
  const runId = params.get("run");
  if (!runId) {
    $("task").textContent = "add ?run=<run_id>&server=<service url> to the page URL";
    return;
  }
  const api = new ServiceApi(server);
  const session = new AnnotationSession(api, runId, { pollWaitMs: 2000 });
  await new CanvasClient(api, session).start();
}

boot().catch((err) => {
  $("error").textContent = String(err);
});
