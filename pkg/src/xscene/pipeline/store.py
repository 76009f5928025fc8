"""Content-addressed scene store with atomic publication.

Records are staged in a scratch directory and moved into place with one
rename, so a crash mid-write never leaves a partial record visible. Done
records are immutable; edits publish new versions linked to their parent.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import uuid
from pathlib import Path

from ..scene.io import canonical_json, load_json

OPPOSITE = {"+x": "-x", "-x": "+x", "+y": "-y", "-y": "+y"}


class StoreError(RuntimeError):
    pass


class SceneStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        (self.root / "scenes").mkdir(parents=True, exist_ok=True)
        (self.root / "staging").mkdir(parents=True, exist_ok=True)

    # -- staging ----------------------------------------------------------

    def new_staging_dir(self) -> Path:
        path = self.root / "staging" / uuid.uuid4().hex
        path.mkdir(parents=True)
        return path

    def clean_staging(self) -> int:
        """Drop leftover staging directories (crash recovery); returns count."""
        count = 0
        for child in (self.root / "staging").iterdir():
            shutil.rmtree(child, ignore_errors=True)
            count += 1
        return count

    @staticmethod
    def content_id(staging_dir: Path) -> str:
        digest = hashlib.sha256()
        for path in sorted(staging_dir.rglob("*")):
            if path.is_file():
                digest.update(str(path.relative_to(staging_dir)).encode())
                digest.update(path.read_bytes())
        return digest.hexdigest()[:16]

    def publish(self, staging_dir: Path, scene_id: str | None = None) -> str:
        scene_id = scene_id or self.content_id(staging_dir)
        final = self.root / "scenes" / scene_id
        if final.exists():
            shutil.rmtree(staging_dir, ignore_errors=True)
            return scene_id
        os.replace(staging_dir, final)
        return scene_id

    # -- reads ------------------------------------------------------------

    def list_scenes(self) -> list[str]:
        return sorted(p.name for p in (self.root / "scenes").iterdir() if p.is_dir())

    def has(self, scene_id: str) -> bool:
        return (self.root / "scenes" / scene_id / "record.json").exists()

    def scene_dir(self, scene_id: str) -> Path:
        path = self.root / "scenes" / scene_id
        if not path.is_dir():
            raise StoreError(f"unknown scene {scene_id!r}")
        return path

    def record(self, scene_id: str) -> dict:
        return load_json(self.scene_dir(scene_id) / "record.json")

    def artifact_path(self, scene_id: str, artifact: str) -> Path:
        base = self.scene_dir(scene_id).resolve()
        path = (base / artifact).resolve()
        if not str(path).startswith(str(base)):
            raise StoreError(f"artifact path {artifact!r} escapes the record")
        if not path.exists():
            raise StoreError(f"scene {scene_id} has no artifact {artifact!r}")
        return path

    # -- adjacency and versions --------------------------------------------

    def _meta_path(self, name: str) -> Path:
        return self.root / name

    def _read_meta(self, name: str) -> dict:
        path = self._meta_path(name)
        if not path.exists():
            return {}
        return json.loads(path.read_text(encoding="utf-8"))

    def _write_meta(self, name: str, doc: dict) -> None:
        tmp = self._meta_path(name + ".tmp")
        tmp.write_text(canonical_json(doc), encoding="utf-8")
        os.replace(tmp, self._meta_path(name))

    def neighbors(self, scene_id: str) -> dict[str, str]:
        return self._read_meta("adjacency.json").get(scene_id, {})

    def link(self, a: str, direction: str, b: str) -> None:
        if direction not in OPPOSITE:
            raise StoreError(f"unknown direction {direction!r}")
        doc = self._read_meta("adjacency.json")
        a_links = doc.setdefault(a, {})
        b_links = doc.setdefault(b, {})
        if direction in a_links or OPPOSITE[direction] in b_links:
            raise StoreError(f"direction {direction} already occupied for {a}")
        a_links[direction] = b
        b_links[OPPOSITE[direction]] = a
        self._write_meta("adjacency.json", doc)

    def link_version(self, parent: str, child: str) -> None:
        doc = self._read_meta("versions.json")
        doc[child] = {"parent": parent}
        self._write_meta("versions.json", doc)

    def versions(self) -> dict:
        return self._read_meta("versions.json")
