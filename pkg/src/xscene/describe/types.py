"""Structured scene descriptions and their JSON wire format.

The wire format is the client contract: top-level keys "Time of the day",
"Weather", "Surrounding environment", "Foreground objects" (list of
single-key objects), "Background elements", "Road condition", optional
"Layout" (textual relation clauses), and "Abstract Description".
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..scene.graphs import RELATION_VOCABULARY


class DescriptionSchemaError(ValueError):
    """Raised when a description document violates the schema."""


@dataclass(frozen=True)
class SceneStyle:
    time_of_day: str
    weather: str
    environment: str
    road_condition: str


@dataclass(frozen=True)
class EntityRef:
    category: str
    attributes: str = ""


@dataclass(frozen=True)
class SceneDescription:
    style: SceneStyle
    foreground: tuple[EntityRef, ...]
    background: tuple[EntityRef, ...]
    textual_layout: tuple[tuple[str, str, str], ...]
    abstract: str = ""

    def __post_init__(self):
        names = set(self.entity_names())
        names.add("ego")
        for subject, relation, obj in self.textual_layout:
            if relation not in RELATION_VOCABULARY:
                raise DescriptionSchemaError(f"unknown relation {relation!r}")
            for endpoint in (subject, obj):
                if endpoint not in names:
                    raise DescriptionSchemaError(
                        f"layout references unknown entity {endpoint!r}"
                    )

    def entity_names(self) -> list[str]:
        """Stable entity names: category + 1-based index, foreground first."""
        counts: dict[str, int] = {}
        names = []
        for ref in (*self.foreground, *self.background):
            counts[ref.category] = counts.get(ref.category, 0) + 1
            names.append(f"{ref.category}{counts[ref.category]}")
        return names

    def entities(self) -> list[tuple[str, EntityRef]]:
        return list(zip(self.entity_names(), (*self.foreground, *self.background)))

    def summary_text(self) -> str:
        parts = [
            self.style.time_of_day,
            self.style.weather,
            self.style.environment,
            self.style.road_condition,
            *(f"{r.category} {r.attributes}".strip() for r in self.foreground),
            *(f"{r.category} {r.attributes}".strip() for r in self.background),
            self.abstract,
        ]
        return " ".join(p for p in parts if p)


def _entity_list(items, what: str) -> tuple[EntityRef, ...]:
    refs = []
    if not isinstance(items, list):
        raise DescriptionSchemaError(f"{what} must be a list")
    for item in items:
        if not isinstance(item, dict) or len(item) != 1:
            raise DescriptionSchemaError(f"{what} entries must be single-key objects")
        ((category, attributes),) = item.items()
        refs.append(EntityRef(category=_slug(category), attributes=str(attributes)))
    return tuple(refs)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9_]+", "_", name.strip().lower()).strip("_")


def layout_text_to_triples(text: str) -> tuple[tuple[str, str, str], ...]:
    """Parse relation clauses like ``car1 front_of ego; bus1 near car1``.

    Relations may be spelled with spaces ("front of"); clauses split on
    ';' or '.'. Filler words the stub never emits but an LLM might ("the",
    "is") are dropped before matching.
    """
    triples = []
    fillers = {"the", "a", "an", "is", "are"}
    for clause in re.split(r"[;.]", text):
        words = [w for w in clause.strip().lower().split() if w not in fillers]
        if not words:
            continue
        joined = " ".join(words)
        match = None
        for relation in RELATION_VOCABULARY:
            spoken = relation.replace("_", " ")
            for form in (relation, spoken):
                m = re.match(rf"^(\S+)\s+{re.escape(form)}\s+(\S+)$", joined)
                if m:
                    match = (m.group(1), relation, m.group(2))
                    break
            if match:
                break
        if match is None:
            raise DescriptionSchemaError(f"cannot parse layout clause {clause.strip()!r}")
        triples.append(match)
    return tuple(triples)


def triples_to_layout_text(triples) -> str:
    return "; ".join(f"{s} {r} {o}" for s, r, o in triples)


WIRE_KEYS = (
    "Time of the day",
    "Weather",
    "Surrounding environment",
    "Foreground objects",
    "Background elements",
    "Road condition",
    "Abstract Description",
)


def description_from_wire(doc: dict, require_layout: bool = False) -> SceneDescription:
    """Parse the client JSON contract into a :class:`SceneDescription`."""
    if not isinstance(doc, dict):
        raise DescriptionSchemaError("description must be a JSON object")
    # The VLM contract capitalizes keys; tolerate case drift on lookup.
    lowered = {k.strip().lower(): v for k, v in doc.items()}

    def get(key: str):
        value = lowered.get(key.lower())
        if value is None:
            raise DescriptionSchemaError(f"missing field {key!r}")
        return value

    style = SceneStyle(
        time_of_day=str(get("Time of the day")),
        weather=str(get("Weather")),
        environment=str(get("Surrounding environment")),
        road_condition=str(get("Road condition")),
    )
    foreground = _entity_list(get("Foreground objects"), "Foreground objects")
    background = _entity_list(get("Background elements"), "Background elements")
    layout_text = lowered.get("layout")
    if require_layout and layout_text is None:
        raise DescriptionSchemaError("missing field 'Layout'")
    triples = layout_text_to_triples(str(layout_text)) if layout_text else ()
    return SceneDescription(
        style=style,
        foreground=foreground,
        background=background,
        textual_layout=triples,
        abstract=str(get("Abstract Description")),
    )


def description_to_wire(desc: SceneDescription) -> dict:
    return {
        "Time of the day": desc.style.time_of_day,
        "Weather": desc.style.weather,
        "Surrounding environment": desc.style.environment,
        "Foreground objects": [{r.category: r.attributes} for r in desc.foreground],
        "Background elements": [{r.category: r.attributes} for r in desc.background],
        "Road condition": desc.style.road_condition,
        "Layout": triples_to_layout_text(desc.textual_layout),
        "Abstract Description": desc.abstract,
    }


def description_to_doc(desc: SceneDescription) -> dict:
    """Internal document form with a schema tag and structured triples."""
    return {
        "schema": "scene_description/1",
        "style": {
            "time_of_day": desc.style.time_of_day,
            "weather": desc.style.weather,
            "environment": desc.style.environment,
            "road_condition": desc.style.road_condition,
        },
        "foreground": [[r.category, r.attributes] for r in desc.foreground],
        "background": [[r.category, r.attributes] for r in desc.background],
        "textual_layout": [list(t) for t in desc.textual_layout],
        "abstract": desc.abstract,
    }


def description_from_doc(doc: dict) -> SceneDescription:
    if doc.get("schema") != "scene_description/1":
        raise DescriptionSchemaError(f"unexpected schema {doc.get('schema')!r}")
    return SceneDescription(
        style=SceneStyle(**doc["style"]),
        foreground=tuple(EntityRef(c, a) for c, a in doc["foreground"]),
        background=tuple(EntityRef(c, a) for c, a in doc["background"]),
        textual_layout=tuple(tuple(t) for t in doc["textual_layout"]),
        abstract=doc.get("abstract", ""),
    )
