"""Scene-description memory, retrieval, and LLM-backed composition."""

from .clients import (
    BrokenThenValidLlm,
    ClientError,
    ClientSuite,
    HashEmbedder,
    StubLlm,
    StubVlm,
    client_suite_from_env,
)
from .compose import (
    DEFAULT_TOP_K,
    CompositionError,
    build_llm_request,
    compose_description,
    describe_prompt,
    load_prompt,
)
from .memory import Frame, MemoryBank, MemoryEntry, MemoryError_, build_memory, retrieve
from .relations import extract_relations, parse_textual_layout
from .types import (
    DescriptionSchemaError,
    EntityRef,
    SceneDescription,
    SceneStyle,
    description_from_doc,
    description_from_wire,
    description_to_doc,
    description_to_wire,
    layout_text_to_triples,
    triples_to_layout_text,
)
