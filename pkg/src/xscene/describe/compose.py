"""Prompt-to-description composition over the retrieval results."""

from __future__ import annotations

import json
from importlib import resources

from .clients import ClientSuite
from .memory import MemoryBank, MemoryEntry, retrieve
from .types import (
    DescriptionSchemaError,
    SceneDescription,
    description_from_wire,
    description_to_wire,
)

DEFAULT_TOP_K = 3


class CompositionError(RuntimeError):
    """Both the initial response and the repair attempt failed the schema."""

    def __init__(self, message: str, responses: list[str]):
        super().__init__(message)
        self.responses = responses


def load_prompt(name: str) -> str:
    return resources.files("xscene.describe.prompts").joinpath(f"{name}.txt").read_text(
        encoding="utf-8"
    )


def build_llm_request(prompt: str, entries: list[MemoryEntry]) -> dict:
    return {
        "system": load_prompt("novel_description"),
        "prompt": prompt,
        "memory": [description_to_wire(e.description) for e in entries],
    }


def _parse_response(text: str) -> SceneDescription:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptionSchemaError(f"response is not valid JSON: {exc}") from exc
    return description_from_wire(doc, require_layout=True)


def compose_description(
    prompt: str, entries: list[MemoryEntry], llm_client
) -> SceneDescription:
    """One LLM round plus at most one schema-repair round."""
    request = build_llm_request(prompt, entries)
    responses: list[str] = []
    first = llm_client.complete(request)
    responses.append(first)
    try:
        return _parse_response(first)
    except DescriptionSchemaError as exc:
        repair = dict(request)
        repair["repair"] = (
            f"The previous response was rejected: {exc}. "
            "Reply again with only the JSON object, exactly matching the schema."
        )
        second = llm_client.complete(repair)
        responses.append(second)
        try:
            return _parse_response(second)
        except DescriptionSchemaError as exc2:
            raise CompositionError(
                f"two consecutive schema failures: {exc2}", responses
            ) from exc2


def describe_prompt(
    prompt: str, bank: MemoryBank, clients: ClientSuite, k: int = DEFAULT_TOP_K
) -> SceneDescription:
    entries = [entry for entry, _ in retrieve(prompt, bank, clients.embed, k)]
    return compose_description(prompt, entries, clients.llm)
