"""Thin HTTP client mirroring the service endpoints; used by the CLI."""

from __future__ import annotations

import time
from pathlib import Path

import httpx


class ServiceClient:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.http = httpx.Client(base_url=self.base_url, timeout=timeout)

    def submit_job(self, kind: str, payload: dict) -> str:
        resp = self.http.post("/jobs", json={"kind": kind, "payload": payload})
        resp.raise_for_status()
        return resp.json()["id"]

    def job(self, job_id: str) -> dict:
        resp = self.http.get(f"/jobs/{job_id}")
        resp.raise_for_status()
        return resp.json()

    def wait(self, job_id: str, timeout: float = 600.0, interval: float = 0.5) -> dict:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            doc = self.job(job_id)
            if doc["state"] in ("done", "failed"):
                return doc
            time.sleep(interval)
        raise TimeoutError(f"job {job_id} did not finish in {timeout}s")

    def scenes(self) -> list[str]:
        resp = self.http.get("/scenes")
        resp.raise_for_status()
        return resp.json()["scenes"]

    def scene(self, scene_id: str) -> dict:
        resp = self.http.get(f"/scenes/{scene_id}")
        resp.raise_for_status()
        return resp.json()

    def download_artifact(self, scene_id: str, artifact: str, dest: Path) -> Path:
        resp = self.http.get(f"/scenes/{scene_id}/{artifact}")
        resp.raise_for_status()
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(resp.content)
        return dest

    def submit_edit(self, scene_id: str, edit: dict, seed: int = 0) -> str:
        resp = self.http.post(
            f"/scenes/{scene_id}/edits", json={"edit": edit, "seed": seed}
        )
        resp.raise_for_status()
        return resp.json()["id"]
