"""HTTP facade for human-in-the-loop runs.

Endpoints (JSON bodies, UTF-8)::

    POST /runs                       create a run (oracle mode must be human)
    GET  /runs/{id}/tasks            pending annotation tasks (?kind=&limit=&wait_ms=)
    POST /runs/{id}/annotations      submit clicks or boxes for a task
    GET  /runs/{id}/status           run status document
    GET  /runs/{id}/images/{img}     proxy image bytes from the image_uri

Errors are ``{"error": "<message>"}`` with the appropriate status code.
Information hygiene: in human mode no response ever contains ground-truth
boxes -- tasks carry image identity, dimensions and operator-produced clicks
only, and the status document exposes pool sizes, never members' labels.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path
from typing import Optional

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from ..dataset import ManifestError, manifest_from_dict
from ..engine import RunConfig
from .runs import RunManager, ServiceError
from .schemas import (
    AnnotationSubmission,
    CreateRunRequest,
    CreateRunResponse,
    StatusResponse,
    SubmissionResponse,
    TaskListResponse,
    TaskModel,
)


def create_app(manager: RunManager | None = None, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="palps annotation service", version="0.1.0")
    app.state.manager = manager if manager is not None else RunManager()
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status_code, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.post("/runs", response_model=CreateRunResponse, status_code=201)
    def create_run(body: CreateRunRequest) -> CreateRunResponse:
        try:
            manifest = manifest_from_dict(body.manifest.model_dump(exclude_none=True))
            config = RunConfig.from_dict(body.config.model_dump())
        except (ManifestError, ValueError) as exc:
            raise ServiceError(400, str(exc))
        handle = app.state.manager.create_run(config, manifest)
        return CreateRunResponse(run_id=handle.run_id)

    @app.get("/runs/{run_id}/tasks", response_model=TaskListResponse)
    def list_tasks(
        run_id: str,
        kind: Optional[str] = None,
        limit: Optional[int] = None,
        wait_ms: Optional[float] = None,
    ) -> TaskListResponse:
        handle = app.state.manager.get(run_id)
        if kind is not None and kind not in ("type1", "type2"):
            raise ServiceError(400, f"unknown task kind {kind!r}")
        if wait_ms:
            handle.wait_for_tasks(wait_ms)
        tasks = [
            TaskModel(
                task_id=t.task_id,
                run_id=run_id,
                kind=t.kind,
                image={
                    "id": t.image.id,
                    "width": t.image.width,
                    "height": t.image.height,
                    "image_uri": t.image.image_uri,
                },
                existing_clicks=[{"x": c.x, "y": c.y} for c in t.existing_clicks],
                state=t.state,
            )
            for t in handle.pending_tasks(kind, limit)
        ]
        return TaskListResponse(tasks=tasks)

    @app.post("/runs/{run_id}/annotations", response_model=SubmissionResponse)
    def submit_annotation(run_id: str, body: AnnotationSubmission) -> SubmissionResponse:
        handle = app.state.manager.get(run_id)
        result = handle.submit(
            body.task_id, body.clicks, body.boxes, body.duration_ms, body.annotator_id
        )
        return SubmissionResponse(**result)

    @app.get("/runs/{run_id}/status", response_model=StatusResponse)
    def run_status(run_id: str) -> StatusResponse:
        handle = app.state.manager.get(run_id)
        return StatusResponse(**handle.status())

    @app.get("/runs/{run_id}/log")
    def run_log(run_id: str):
        """The replayable NDJSON run log; available once the run is done."""
        handle = app.state.manager.get(run_id)
        with handle.lock:
            finished = handle.run_log is not None
            lines = handle.run_log.to_lines() if finished else None
        if not finished:
            raise ServiceError(409, "run log is available after the run completes")
        return Response(content="\n".join(lines) + "\n", media_type="application/x-ndjson")

    @app.get("/runs/{run_id}/images/{image_id}")
    def image_bytes(run_id: str, image_id: str):
        handle = app.state.manager.get(run_id)
        record = handle.manifest.by_id().get(image_id)
        if record is None:
            raise ServiceError(404, f"unknown image {image_id!r}")
        uri = record.image_uri
        if not uri:
            raise ServiceError(404, f"image {image_id!r} has no image_uri")
        if uri.startswith("http://") or uri.startswith("https://"):
            upstream = httpx.get(uri, timeout=10.0)
            media_type = upstream.headers.get("content-type", "application/octet-stream")
            return Response(content=upstream.content, media_type=media_type)
        path = Path(uri)
        if not path.is_file():
            raise ServiceError(404, f"image file {uri!r} not found")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return FileResponse(path, media_type=media_type)

    return app
