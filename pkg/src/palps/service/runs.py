"""Run lifecycle for human-in-the-loop annotation.

Each run owns one engine thread. The engine blocks inside the queue-backed
oracle whenever it needs annotations; HTTP handlers feed submissions in under
the run's lock and wake it when a phase completes. All run-state mutation is
funneled through that single lock, so concurrent requests are safe and the
engine itself stays strictly sequential.

The model cost ledger (charged by the engine from the published timing
constants) is authoritative; operator-measured ``duration_ms`` values are
accumulated separately so empirical times can be compared against the model
without ever replacing it.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..dataset import DatasetManifest, ImageRecord
from ..engine import ActiveLearningEngine, EpisodeLog, RunConfig, RunLog
from ..geometry import BoundingBox, ClickPoint
from ..sampling import WeakLabelSet

log = logging.getLogger(__name__)


class ServiceError(Exception):
    def __init__(self, status_code: int, message: str) -> None:
        super().__init__(message)
        self.status_code = status_code
        self.message = message


@dataclass
class AnnotationTask:
    task_id: str
    kind: str  # "type1" | "type2"
    image: ImageRecord
    existing_clicks: tuple[ClickPoint, ...] = ()
    state: str = "pending"  # "pending" | "submitted" | "consumed"
    clicks: Optional[list[ClickPoint]] = None
    boxes: Optional[list[BoundingBox]] = None
    duration_ms: float = 0.0
    annotator_id: str = ""


@dataclass
class RunHandle:
    run_id: str
    config: RunConfig
    manifest: DatasetManifest
    lock: threading.RLock = field(default_factory=threading.RLock)
    phase: str = "starting"  # starting|type1|type2|working|done|failed
    episode: int = 0
    tasks: dict[str, AnnotationTask] = field(default_factory=dict)
    task_order: list[str] = field(default_factory=list)
    phase_task_ids: list[str] = field(default_factory=list)
    pool_sizes: dict[str, int] = field(default_factory=dict)
    test_size: int = 0
    ledger: dict = field(default_factory=dict)
    map_at_50: Optional[float] = None
    measured_ms: dict[str, float] = field(default_factory=lambda: {"type1": 0.0, "type2": 0.0})
    error: Optional[str] = None
    run_log: Optional[RunLog] = None
    thread: Optional[threading.Thread] = None

    def __post_init__(self) -> None:
        self.cond = threading.Condition(self.lock)

    # -- queue side (engine thread) ------------------------------------------

    def publish_phase(self, kind: str, tasks: list[AnnotationTask]) -> dict[str, AnnotationTask]:
        """Expose a batch of tasks, block until all are submitted, then
        consume them. Called from the engine thread only. Tasks from closed
        phases stay in the registry so late submissions get a 409, not a 404.
        """
        with self.cond:
            for t in tasks:
                self.tasks[t.task_id] = t
                self.task_order.append(t.task_id)
            self.phase_task_ids = [t.task_id for t in tasks]
            self.phase = kind
            self.cond.notify_all()
            while not self._phase_complete() and self.error is None:
                self.cond.wait(timeout=0.5)
            collected = {tid: self.tasks[tid] for tid in self.phase_task_ids}
            for tid in self.phase_task_ids:
                self.tasks[tid].state = "consumed"
            self.phase = "working"
            self.cond.notify_all()
            return collected

    def _phase_complete(self) -> bool:
        ids = self.phase_task_ids
        return bool(ids) and all(self.tasks[tid].state == "submitted" for tid in ids)

    # -- HTTP side -------------------------------------------------------------

    def pending_tasks(self, kind: Optional[str], limit: Optional[int]) -> list[AnnotationTask]:
        """Tasks still awaiting a submission, in publication order. Submitted
        tasks drop out of the listing but stay addressable by task_id for
        replacement until their phase closes."""
        with self.lock:
            out = []
            for task_id in self.task_order:
                task = self.tasks[task_id]
                if task.state != "pending":
                    continue
                if kind is not None and task.kind != kind:
                    continue
                out.append(task)
                if limit is not None and len(out) >= limit:
                    break
            return out

    def wait_for_tasks(self, wait_ms: float) -> None:
        deadline = wait_ms / 1000.0
        with self.cond:
            if not self.pending_tasks(None, 1) and self.phase not in ("done", "failed"):
                self.cond.wait(timeout=min(deadline, 30.0))

    def submit(self, task_id: str, clicks, boxes, duration_ms: float, annotator_id: str) -> dict:
        with self.cond:
            task = self.tasks.get(task_id)
            if task is None:
                raise ServiceError(404, f"unknown task {task_id!r}")
            if task.state == "consumed":
                raise ServiceError(409, f"task {task_id!r} already consumed by an advanced phase")
            if task.kind == "type1":
                if clicks is None or boxes is not None:
                    raise ServiceError(422, "type1 tasks take clicks, not boxes")
                parsed_clicks = [ClickPoint(c.x, c.y) for c in clicks]
                for c in parsed_clicks:
                    if not (0 <= c.x <= task.image.width and 0 <= c.y <= task.image.height):
                        raise ServiceError(422, f"click {c} outside image bounds")
                task.clicks = parsed_clicks
            else:
                if boxes is None or clicks is not None:
                    raise ServiceError(422, "type2 tasks take boxes, not clicks")
                try:
                    parsed_boxes = [BoundingBox(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes]
                except ValueError as exc:
                    raise ServiceError(422, str(exc)) from exc
                for b in parsed_boxes:
                    if b.x_max > task.image.width or b.y_max > task.image.height:
                        raise ServiceError(422, f"box {b} outside image bounds")
                task.boxes = parsed_boxes
            replaced = task.state == "submitted"
            task.state = "submitted"
            task.duration_ms = float(duration_ms)
            task.annotator_id = annotator_id
            advanced = self._phase_complete()
            if advanced:
                for tid in self.phase_task_ids:
                    t = self.tasks[tid]
                    self.measured_ms[t.kind] += t.duration_ms
                self.cond.notify_all()
            return {"ok": True, "replaced": replaced, "phase_advanced": advanced}

    # -- engine callbacks --------------------------------------------------------

    def on_episode(self, entry: EpisodeLog) -> None:
        with self.lock:
            self.pool_sizes = {
                "labeled": entry.labeled_size,
                "weak": entry.weak_size,
                "unlabeled": entry.unlabeled_size,
            }
            self.ledger = entry.ledger
            self.map_at_50 = entry.eval.get("map_at_50")

    def status(self) -> dict:
        with self.lock:
            pending: dict[str, int] = {"type1": 0, "type2": 0}
            for task in self.tasks.values():
                if task.state == "pending":
                    pending[task.kind] += 1
            return {
                "run_id": self.run_id,
                "phase": self.phase,
                "episode": self.episode,
                "pending_counts": pending,
                "pools": dict(self.pool_sizes),
                "test_images": self.test_size,
                "ledger": dict(self.ledger),
                "map_at_50": self.map_at_50,
                "measured_seconds": {
                    "type1": self.measured_ms["type1"] / 1000.0,
                    "type2": self.measured_ms["type2"] / 1000.0,
                },
                "error": self.error,
            }


class QueueOracle:
    """Oracle that defers every annotation batch to the HTTP task queue."""

    def __init__(self, handle: RunHandle) -> None:
        self.handle = handle

    def _task(self, kind: str, image: ImageRecord, clicks: tuple[ClickPoint, ...] = ()) -> AnnotationTask:
        return AnnotationTask(
            task_id=f"{kind}:{image.id}",
            kind=kind,
            image=image,
            existing_clicks=clicks,
        )

    def annotate_type1_batch(self, images: Sequence[ImageRecord]) -> dict[str, WeakLabelSet]:
        with self.handle.lock:
            self.handle.episode += 1
        tasks = [self._task("type1", img) for img in images]
        collected = self.handle.publish_phase("type1", tasks)
        return {
            t.image.id: WeakLabelSet(image_id=t.image.id, clicks=tuple(t.clicks or []))
            for t in collected.values()
        }

    def annotate_type2_batch(
        self, items: Sequence[tuple[ImageRecord, WeakLabelSet]]
    ) -> dict[str, tuple[BoundingBox, ...]]:
        tasks = [self._task("type2", img, weak.clicks) for img, weak in items]
        collected = self.handle.publish_phase("type2", tasks)
        return {t.image.id: tuple(t.boxes or []) for t in collected.values()}

    def annotate_direct_batch(self, images: Sequence[ImageRecord]) -> dict[str, tuple[BoundingBox, ...]]:
        # Baseline flow: box drawing with no prior clicks. Counts one episode.
        with self.handle.lock:
            self.handle.episode += 1
        tasks = [self._task("type2", img) for img in images]
        collected = self.handle.publish_phase("type2", tasks)
        return {t.image.id: tuple(t.boxes or []) for t in collected.values()}


class RunManager:
    """Single-process registry of runs; one engine thread per run."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._runs: dict[str, RunHandle] = {}
        self._counter = 0

    def create_run(self, config: RunConfig, manifest: DatasetManifest) -> RunHandle:
        if config.oracle.mode != "human":
            raise ServiceError(400, "service runs require oracle mode 'human'")
        with self._lock:
            self._counter += 1
            run_id = f"run-{self._counter}"
        handle = RunHandle(run_id=run_id, config=config, manifest=manifest)
        engine = ActiveLearningEngine(config, manifest, oracle=QueueOracle(handle))
        handle.test_size = len(engine.test_ids)
        pool = len(engine.pool_ids)
        handle.pool_sizes = {
            "labeled": config.initial_labeled,
            "weak": 0,
            "unlabeled": pool - config.initial_labeled,
        }

        def worker() -> None:
            try:
                run_log = engine.run(sink=handle.on_episode)
                with handle.cond:
                    handle.run_log = run_log
                    handle.phase = "done"
                    handle.cond.notify_all()
            except Exception as exc:  # surfaced via status, not lost in the thread
                log.exception("run %s failed", run_id)
                with handle.cond:
                    handle.error = str(exc)
                    handle.phase = "failed"
                    handle.cond.notify_all()

        handle.thread = threading.Thread(target=worker, name=f"engine-{run_id}", daemon=True)
        with self._lock:
            self._runs[run_id] = handle
        handle.thread.start()
        return handle

    def get(self, run_id: str) -> RunHandle:
        with self._lock:
            handle = self._runs.get(run_id)
        if handle is None:
            raise ServiceError(404, f"unknown run {run_id!r}")
        return handle
