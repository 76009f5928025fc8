"""Pluggable VLM / LLM / embedding clients with deterministic stubs.

Backends are selected by environment variables (``XSCENE_VLM_BACKEND``,
``XSCENE_LLM_BACKEND``, ``XSCENE_EMBED_BACKEND``; values ``stub`` or
``http``). Live HTTP backends read their endpoint and API key from
``XSCENE_<ROLE>_URL`` / ``XSCENE_<ROLE>_API_KEY`` — keys never appear in
request payloads persisted to disk.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

import httpx


class ClientError(RuntimeError):
    """A client failed to produce a usable response."""


class VlmClient(Protocol):
    def describe_frame(self, request: dict) -> dict: ...


class LlmClient(Protocol):
    def complete(self, request: dict) -> str: ...


class EmbedClient(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


@dataclass
class ClientSuite:
    vlm: VlmClient
    llm: LlmClient
    embed: EmbedClient
    timeout_s: float = 30.0
    retries: int = 1


def _stable_hash(text: str, salt: str = "") -> int:
    digest = hashlib.blake2b((salt + text).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class HashEmbedder:
    """Deterministic bag-of-words embedding: tokens hash to signed buckets."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = re.findall(r"[a-z0-9_]+", text.lower())
        for token in tokens:
            h = _stable_hash(token)
            idx = h % self.dim
            sign = 1.0 if (h >> 32) & 1 else -1.0
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            norm = 1.0
        return vec / norm


_TIMES = ("daytime", "nighttime")
_WEATHERS = ("sunny", "rainy", "cloudy", "foggy")
_ENVIRONMENTS = ("downtown", "suburban", "residential", "industrial")
_ROADS = ("intersection", "straight road", "wide road", "narrow street")


class StubVlm:
    """Deterministic frame describer.

    The request carries the frame payload; ``hints`` (style fields plus the
    annotated object classes) stand in for what a real model would read off
    the pixels. Without hints, fields are chosen by hashing the payload.
    """

    def __init__(self, drop_field_for: frozenset[str] = frozenset()):
        self.drop_field_for = drop_field_for

    def describe_frame(self, request: dict) -> dict:
        hints = request.get("hints", {})
        key = json.dumps(request.get("frame_id", ""), sort_keys=True)
        pick = lambda options, salt: options[_stable_hash(key, salt) % len(options)]
        foreground = [
            {cls: str(attr)} for cls, attr in hints.get("foreground", [["car", "parked"]])
        ]
        background = [
            {cls: str(attr)}
            for cls, attr in hints.get("background", [["road", "two lanes"]])
        ]
        doc = {
            "Time of the day": hints.get("time_of_day", pick(_TIMES, "t")),
            "Weather": hints.get("weather", pick(_WEATHERS, "w")),
            "Surrounding environment": hints.get("environment", pick(_ENVIRONMENTS, "e")),
            "Foreground objects": foreground,
            "Background elements": background,
            "Road condition": hints.get("road_condition", pick(_ROADS, "r")),
            "Abstract Description": hints.get(
                "abstract", f"A {pick(_WEATHERS, 'w')} scene in a {pick(_ENVIRONMENTS, 'e')} area."
            ),
        }
        for name in self.drop_field_for:
            if request.get("frame_id") == name:
                doc.pop("Weather", None)
        return doc


class StubLlm:
    """Composes a valid response by blending the retrieved memory entries."""

    def __init__(self, max_foreground: int = 4, max_background: int = 4):
        self.max_foreground = max_foreground
        self.max_background = max_background

    def complete(self, request: dict) -> str:
        if request.get("task") == "edit_routing":
            return self._route_edit(request)
        prompt = request.get("prompt", "")
        memory = request.get("memory", [])
        base = memory[0] if memory else {}
        foreground = []
        background = []
        for entry in memory:
            foreground.extend(entry.get("Foreground objects", []))
            background.extend(entry.get("Background elements", []))
        foreground = foreground[: self.max_foreground] or [{"car": "parked"}]
        background = background[: self.max_background] or [{"road": "empty"}]

        counts: dict[str, int] = {}
        names = []
        for item in foreground + background:
            ((cls, _),) = item.items()
            slug = re.sub(r"[^a-z0-9_]+", "_", cls.strip().lower()).strip("_")
            counts[slug] = counts.get(slug, 0) + 1
            names.append(f"{slug}{counts[slug]}")
        clauses = [f"{names[0]} front_of ego"]
        for prev, cur in zip(names, names[1:]):
            clauses.append(f"{cur} near {prev}")
        doc = {
            "Time of the day": base.get("Time of the day", "daytime"),
            "Weather": base.get("Weather", "sunny"),
            "Surrounding environment": base.get("Surrounding environment", "downtown"),
            "Foreground objects": foreground,
            "Background elements": background,
            "Road condition": base.get("Road condition", "straight road"),
            "Layout": "; ".join(clauses),
            "Abstract Description": f"Scene for prompt: {prompt}.",
        }
        return json.dumps(doc)


    # Synonyms a prompt may use for node categories.
    _CATEGORY_WORDS = {
        "vehicle": ("vehicle", "car", "truck", "bus", "van"),
        "pedestrian": ("pedestrian", "person", "walker"),
        "lane": ("lane", "road"),
    }

    def _route_edit(self, request: dict) -> str:
        """Map a free-text intent onto a structured edit op."""
        text = request.get("text", "").lower()
        nodes = request.get("nodes", [])
        op = "remove" if "remove" in text or "delete" in text else "noop"
        target = None
        for node in nodes:
            if node["id"].lower() in text:
                target = node["id"]
                break
        if target is None:
            for node in nodes:
                words = self._CATEGORY_WORDS.get(node["category"], (node["category"],))
                if any(w in text for w in words):
                    target = node["id"]
                    break
        return json.dumps({"op": op, "node": target})


class BrokenThenValidLlm:
    """Returns unparsable output first, then delegates; exercises repair."""

    def __init__(self, inner: LlmClient, failures: int = 1):
        self.inner = inner
        self.failures = failures
        self.calls = 0
        self.requests: list[dict] = []

    def complete(self, request: dict) -> str:
        self.requests.append(request)
        self.calls += 1
        if self.calls <= self.failures:
            return "not json at all {"
        return self.inner.complete(request)


class HttpLlm:
    """Minimal live backend: POSTs the request body to a JSON endpoint."""

    def __init__(self, url: str, api_key: str, timeout_s: float = 30.0):
        self.url = url
        self.api_key = api_key
        self.timeout_s = timeout_s

    def complete(self, request: dict) -> str:
        resp = httpx.post(
            self.url,
            json=request,
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout_s,
        )
        if resp.status_code != 200:
            raise ClientError(f"LLM backend returned {resp.status_code}")
        return resp.text


class HttpVlm:
    def __init__(self, url: str, api_key: str, timeout_s: float = 30.0):
        self.url = url
        self.api_key = api_key
        self.timeout_s = timeout_s

    def describe_frame(self, request: dict) -> dict:
        resp = httpx.post(
            self.url,
            json=request,
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout_s,
        )
        if resp.status_code != 200:
            raise ClientError(f"VLM backend returned {resp.status_code}")
        return resp.json()


def client_suite_from_env() -> ClientSuite:
    def backend(role: str) -> str:
        return os.environ.get(f"XSCENE_{role}_BACKEND", "stub")

    def live(role: str, cls):
        url = os.environ.get(f"XSCENE_{role}_URL")
        key = os.environ.get(f"XSCENE_{role}_API_KEY", "")
        if not url:
            raise ClientError(f"XSCENE_{role}_URL required for http backend")
        return cls(url, key)

    vlm = StubVlm() if backend("VLM") == "stub" else live("VLM", HttpVlm)
    llm = StubLlm() if backend("LLM") == "stub" else live("LLM", HttpLlm)
    embed = HashEmbedder()
    return ClientSuite(vlm=vlm, llm=llm, embed=embed)
