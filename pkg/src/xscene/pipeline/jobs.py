"""Job queue: bounded worker pool executing generation jobs."""

from __future__ import annotations

import queue
import threading
import time
import traceback
import uuid
from dataclasses import dataclass, field

from .runtime import Runtime
from .stages import (
    GenerateRequest,
    PipelineError,
    run_edit,
    run_extend,
    run_generate,
)

TERMINAL_STATES = ("done", "failed")
STATE_ORDER = (
    "queued",
    "describing",
    "laying_out",
    "generating_occ",
    "rendering",
    "generating_views",
    "done",
    "failed",
)


@dataclass
class GenerationJob:
    id: str
    kind: str  # generate | extend | edit
    payload: dict
    state: str = "queued"
    error: str | None = None
    failed_stage: str | None = None
    scene_ids: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state,
            "error": self.error,
            "failed_stage": self.failed_stage,
            "scene_ids": list(self.scene_ids),
            "timings": dict(self.timings),
        }


class JobRunner:
    """Bounded queue plus worker threads; jobs are internally sequential."""

    def __init__(self, runtime: Runtime, workers: int | None = None, queue_depth: int | None = None):
        self.runtime = runtime
        self._queue: queue.Queue = queue.Queue(
            maxsize=queue_depth or runtime.config.queue_depth
        )
        self._jobs: dict[str, GenerationJob] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._workers = [
            threading.Thread(target=self._worker, daemon=True)
            for _ in range(workers or runtime.config.workers)
        ]
        for w in self._workers:
            w.start()

    def submit(self, kind: str, payload: dict) -> str:
        if kind not in ("generate", "extend", "edit"):
            raise ValueError(f"unknown job kind {kind!r}")
        job = GenerationJob(id=uuid.uuid4().hex[:12], kind=kind, payload=payload)
        with self._lock:
            self._jobs[job.id] = job
        self._queue.put(job.id, timeout=5)
        return job.id

    def get(self, job_id: str) -> GenerationJob:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(job_id)
            return self._jobs[job_id]

    def wait(self, job_id: str, timeout: float = 120.0) -> GenerationJob:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            job = self.get(job_id)
            if job.state in TERMINAL_STATES:
                return job
            time.sleep(0.02)
        raise TimeoutError(f"job {job_id} still {self.get(job_id).state}")

    def shutdown(self):
        self._stop.set()
        for _ in self._workers:
            self._queue.put(None)

    # -- internals -----------------------------------------------------------

    def _set_state(self, job: GenerationJob, state: str):
        if job.state in TERMINAL_STATES:
            raise RuntimeError("terminal job states are immutable")
        job.state = state
        job.timings[state] = time.time()

    def _worker(self):
        while not self._stop.is_set():
            item = self._queue.get()
            if item is None:
                return
            job = self.get(item)
            try:
                self._execute(job)
            except PipelineError as exc:
                job.failed_stage = exc.stage
                job.error = str(exc)
                self._set_state(job, "failed")
            except Exception as exc:  # noqa: BLE001 - surfaced in the job record
                job.error = f"{exc}\n{traceback.format_exc(limit=3)}"
                self._set_state(job, "failed")

    def _execute(self, job: GenerationJob):
        runtime = self.runtime
        store = runtime.store
        on_stage = lambda stage: self._set_state(job, stage)
        if job.kind == "generate":
            request = GenerateRequest(
                prompt=job.payload.get("prompt"),
                layout_doc=job.payload.get("layout"),
                description_doc=job.payload.get("description"),
                seed=int(job.payload.get("seed", 0)),
            )
            staging = store.new_staging_dir()
            run_generate(runtime, request, staging, on_stage=on_stage)
            job.scene_ids = [store.publish(staging)]
        elif job.kind == "extend":
            job.scene_ids = run_extend(
                runtime,
                store,
                scene_id=job.payload["scene_id"],
                direction=job.payload["direction"],
                count=int(job.payload.get("count", 1)),
                seed=int(job.payload.get("seed", 0)),
                on_stage=on_stage,
            )
        elif job.kind == "edit":
            staging = store.new_staging_dir()
            parent = job.payload["scene_id"]
            run_edit(
                runtime,
                store,
                scene_id=parent,
                payload=job.payload["edit"],
                seed=int(job.payload.get("seed", 0)),
                staging=staging,
                on_stage=on_stage,
            )
            new_id = store.publish(staging)
            store.link_version(parent, new_id)
            job.scene_ids = [new_id]
        self._set_state(job, "done")
