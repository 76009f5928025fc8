"""HTTP API over the pipeline: job submission, polling, artifact access."""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, model_validator

from .config import AppConfig
from .jobs import JobRunner
from .runtime import Runtime
from .store import StoreError

API_SCHEMA = "xscene-api/1"


class GeneratePayload(BaseModel):
    prompt: str | None = None
    layout: dict | None = None
    description: dict | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.prompt is None) == (self.layout is None):
            raise ValueError("provide exactly one of prompt or layout")
        return self


class ExtendPayload(BaseModel):
    scene_id: str
    direction: Literal["+x", "-x", "+y", "-y"]
    count: int = Field(default=1, ge=0)
    seed: int = 0


class EditPayload(BaseModel):
    scene_id: str
    edit: dict
    seed: int = 0


class JobRequest(BaseModel):
    kind: Literal["generate", "extend", "edit"]
    payload: GeneratePayload | ExtendPayload | EditPayload

    @model_validator(mode="before")
    @classmethod
    def _coerce_payload(cls, data):
        if isinstance(data, dict):
            kinds = {"generate": GeneratePayload, "extend": ExtendPayload, "edit": EditPayload}
            kind = data.get("kind")
            if kind in kinds and isinstance(data.get("payload"), dict):
                data = dict(data)
                data["payload"] = kinds[kind].model_validate(data["payload"])
        return data


class JobStatus(BaseModel):
    schema_version: str = API_SCHEMA
    id: str
    kind: str
    state: str
    error: str | None = None
    failed_stage: str | None = None
    scene_ids: list[str] = []


class JobAccepted(BaseModel):
    schema_version: str = API_SCHEMA
    id: str


class SceneSummary(BaseModel):
    schema_version: str = API_SCHEMA
    id: str
    chunk_origin: list[float]
    neighbors: dict[str, str]
    artifacts: dict


class SceneList(BaseModel):
    schema_version: str = API_SCHEMA
    scenes: list[str]


def create_app(
    config: AppConfig | None = None,
    runtime: Runtime | None = None,
    runner: JobRunner | None = None,
) -> FastAPI:
    config = config or AppConfig.load()
    if runtime is None:
        runtime = Runtime.from_config(config)
    if runner is None:
        runner = JobRunner(runtime)
    app = FastAPI(title="xscene", version="0.1.0")
    app.state.runtime = runtime
    app.state.runner = runner

    @app.post("/jobs", response_model=JobAccepted, status_code=202)
    def submit_job(request: JobRequest):
        try:
            job_id = runner.submit(request.kind, request.payload.model_dump())
        except Exception as exc:  # queue full and similar
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        return JobAccepted(id=job_id)

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        try:
            job = runner.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown job")
        return JobStatus(**job.to_doc() | {})

    @app.get("/scenes", response_model=SceneList)
    def list_scenes():
        return SceneList(scenes=runtime.store.list_scenes())

    @app.get("/scenes/{scene_id}", response_model=SceneSummary)
    def scene_summary(scene_id: str):
        try:
            record = runtime.store.record(scene_id)
        except StoreError:
            raise HTTPException(status_code=404, detail="unknown scene")
        return SceneSummary(
            id=scene_id,
            chunk_origin=record["chunk_origin"],
            neighbors=runtime.store.neighbors(scene_id),
            artifacts=record["artifacts"],
        )

    @app.get("/scenes/{scene_id}/record.json")
    def scene_record(scene_id: str):
        try:
            return JSONResponse(runtime.store.record(scene_id))
        except StoreError:
            raise HTTPException(status_code=404, detail="unknown scene")

    @app.get("/scenes/{scene_id}/{artifact:path}")
    def scene_artifact(scene_id: str, artifact: str):
        try:
            path = runtime.store.artifact_path(scene_id, artifact)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if path.is_dir():
            listing = sorted(p.name for p in path.iterdir())
            return JSONResponse({"schema_version": API_SCHEMA, "files": listing})
        media = "application/octet-stream"
        if path.suffix == ".json":
            media = "application/json"
        elif path.suffix == ".png":
            media = "image/png"
        return FileResponse(path, media_type=media)

    @app.post("/scenes/{scene_id}/edits", response_model=JobAccepted, status_code=202)
    def submit_edit(scene_id: str, payload: dict):
        if not runtime.store.has(scene_id):
            raise HTTPException(status_code=404, detail="unknown scene")
        body = {"scene_id": scene_id, "edit": payload.get("edit", payload), "seed": payload.get("seed", 0)}
        job_id = runner.submit("edit", body)
        return JobAccepted(id=job_id)

    dist = Path(config.frontend_dist) if config.frontend_dist else None
    if dist and dist.is_dir():
        app.mount("/studio", StaticFiles(directory=dist, html=True), name="studio")

    return app


def serve(config: AppConfig) -> None:
    """Blocking server start; fails fast if checkpoints cannot load."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
