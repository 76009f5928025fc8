"""Pipeline orchestration: stages, store, jobs, HTTP service, client."""

from .config import AppConfig, CheckpointPaths
from .client import ServiceClient
from .jobs import GenerationJob, JobRunner
from .runtime import Runtime, load_or_build_memory
from .service import create_app, serve
from .stages import (
    EGO_BOX,
    EditOp,
    GenerateRequest,
    PipelineError,
    apply_edit_to_graph,
    layout_graph_from_description,
    parse_edit_payload,
    run_edit,
    run_extend,
    run_generate,
)
from .store import SceneStore, StoreError
