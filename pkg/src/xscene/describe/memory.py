"""Scene-description memory bank: offline construction and retrieval."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..scene.boxes import Box7, LanePolyline
from ..scene.io import dump_json, load_json
from .clients import ClientSuite
from .relations import extract_relations
from .types import (
    DescriptionSchemaError,
    SceneDescription,
    description_from_doc,
    description_from_wire,
    description_to_doc,
)

log = logging.getLogger(__name__)

EMBED_NORM_ATOL = 1e-6


class MemoryError_(RuntimeError):
    """Raised on empty banks and malformed frames."""


@dataclass(frozen=True)
class MemoryEntry:
    id: str
    description: SceneDescription
    raw_text: str
    embedding: np.ndarray
    source: str = ""

    def __post_init__(self):
        emb = np.ascontiguousarray(self.embedding, dtype=np.float64)
        if abs(np.linalg.norm(emb) - 1.0) > EMBED_NORM_ATOL:
            raise ValueError("entry embedding must be unit-norm")
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)


@dataclass
class Frame:
    """One source frame: opaque image payloads plus spatial annotations."""

    frame_id: str
    images: list
    boxes: list[Box7]
    lanes: list[LanePolyline] = field(default_factory=list)
    hints: dict = field(default_factory=dict)
    source: str = ""


class MemoryBank:
    """Append-only entry store with an aligned embedding matrix."""

    def __init__(self, entries: list[MemoryEntry] | None = None):
        self._entries: list[MemoryEntry] = list(entries or [])

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[MemoryEntry]:
        return list(self._entries)

    def append(self, entry: MemoryEntry) -> None:
        if any(e.id == entry.id for e in self._entries):
            raise ValueError(f"duplicate entry id {entry.id!r}")
        self._entries.append(entry)

    def embedding_matrix(self) -> np.ndarray:
        if not self._entries:
            return np.zeros((0, 0))
        return np.stack([e.embedding for e in self._entries])

    def save(self, directory: Path | str) -> None:
        directory = Path(directory)
        entry_dir = directory / "entries"
        entry_dir.mkdir(parents=True, exist_ok=True)
        for entry in self._entries:
            dump_json(
                {
                    "schema": "memory_entry/1",
                    "id": entry.id,
                    "description": description_to_doc(entry.description),
                    "raw_text": entry.raw_text,
                    "source": entry.source,
                },
                entry_dir / f"{entry.id}.json",
            )
        matrix = self.embedding_matrix().astype(np.float32)
        (directory / "embeddings.f32").write_bytes(matrix.tobytes())
        dump_json(
            {
                "schema": "memory_bank/1",
                "count": len(self._entries),
                "dim": 0 if matrix.size == 0 else matrix.shape[1],
                "order": [e.id for e in self._entries],
            },
            directory / "manifest.json",
        )

    @classmethod
    def load(cls, directory: Path | str) -> "MemoryBank":
        directory = Path(directory)
        manifest = load_json(directory / "manifest.json")
        raw = np.frombuffer(
            (directory / "embeddings.f32").read_bytes(), dtype=np.float32
        )
        count, dim = manifest["count"], manifest["dim"]
        matrix = raw.reshape(count, dim).astype(np.float64) if count else raw.reshape(0, 0)
        entries = []
        for i, entry_id in enumerate(manifest["order"]):
            doc = load_json(directory / "entries" / f"{entry_id}.json")
            emb = matrix[i]
            emb = emb / np.linalg.norm(emb)
            entries.append(
                MemoryEntry(
                    id=doc["id"],
                    description=description_from_doc(doc["description"]),
                    raw_text=doc["raw_text"],
                    embedding=emb,
                    source=doc.get("source", ""),
                )
            )
        return cls(entries)


def _entry_names_for_boxes(
    description: SceneDescription, boxes: list[Box7], class_names: dict[int, str]
) -> list[tuple[str, Box7]]:
    """Match annotation boxes to description entity names by class, in order."""
    available: dict[str, list[str]] = {}
    for name, ref in description.entities():
        available.setdefault(ref.category, []).append(name)
    named = []
    for box in boxes:
        category = class_names.get(box.class_id, f"class{box.class_id}")
        pool = available.get(category)
        if not pool:
            raise DescriptionSchemaError(
                f"annotation box of class {category!r} has no matching entity"
            )
        named.append((pool.pop(0), box))
    return named


def build_memory(
    frames: list[Frame],
    clients: ClientSuite,
    class_names: dict[int, str],
) -> MemoryBank:
    """One entry per frame: VLM description, parsed style/objects/background,
    relation triples recomputed from the annotations.

    A frame whose VLM response fails the schema is skipped with a logged
    diagnostic; a frame missing annotations is an error.
    """
    bank = MemoryBank()
    for frame in frames:
        if frame.boxes is None or frame.lanes is None:
            raise MemoryError_(f"frame {frame.frame_id!r} missing annotations")
        try:
            raw = clients.vlm.describe_frame(
                {"frame_id": frame.frame_id, "images": frame.images, "hints": frame.hints}
            )
            base = description_from_wire(raw)
            named = _entry_names_for_boxes(base, frame.boxes, class_names)
            road_names = [
                name
                for name, ref in base.entities()
                if ref.category in ("road", "lane", "driveable_surface")
            ]
            lane_entities = list(zip(road_names, frame.lanes))
            triples = extract_relations(named, lane_entities)
            description = SceneDescription(
                style=base.style,
                foreground=base.foreground,
                background=base.background,
                textual_layout=tuple(triples),
                abstract=base.abstract,
            )
        except DescriptionSchemaError as exc:
            log.warning("skipping frame %s: %s", frame.frame_id, exc)
            continue
        raw_text = description.summary_text()
        embedding = clients.embed.embed(raw_text)
        bank.append(
            MemoryEntry(
                id=frame.frame_id,
                description=description,
                raw_text=raw_text,
                embedding=embedding,
                source=frame.source,
            )
        )
    return bank


def retrieve(
    prompt: str, bank: MemoryBank, embed_client, k: int
) -> list[tuple[MemoryEntry, float]]:
    """Top-k entries by cosine similarity, ties broken by ascending id."""
    if len(bank) == 0:
        raise MemoryError_("empty memory")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = embed_client.embed(prompt)
    scored = [
        (entry, float(entry.embedding @ query)) for entry in bank.entries
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0].id))
    return scored[: min(k, len(scored))]
