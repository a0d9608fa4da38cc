"""Multimodal entity linking engine.

Links surface-form mentions (text plus an optional image) to entities in a
local knowledge-graph snapshot: lexical top-k retrieval, LLM-backed entity
selection, text-consistency and image-alignment gates, and an iterative
visual-clue feedback loop when text alone is not enough.
"""

__version__ = "0.1.0"

from .backends import (
    Backends,
    HttpBackend,
    MockBackend,
    SelectorRequest,
    SelectorResponse,
    VisualClue,
    http_backends,
    mock_backends,
)
from .config import DEFAULT_INSTRUCTION, PRESETS, AppConfig, PipelineConfig, load_app_config
from .evaluation import (
    EvalRecord,
    EvalReport,
    avg_response_time,
    run_ablation,
    run_eval,
    topk_accuracy,
)
from .instructions import export_instructions, load_dataset_jsonl, validate_instruction_record
from .kg import EntityRecord, KgSnapshot, load_kg, serialize_kg, summarize_descriptions
from .pipeline import (
    LinkResult,
    MentionSample,
    build_entity_context,
    build_mention_context,
    iav_score,
    icr_score,
    link,
    link_topk,
    run_tes,
)
from .retrieval import Candidate, CandidateSet, lexical_score, retrieve_topk
from .service import create_app
from .trace import LinkTrace, replay_prediction, validate_trace

__all__ = [
    "__version__",
    "Backends",
    "HttpBackend",
    "MockBackend",
    "SelectorRequest",
    "SelectorResponse",
    "VisualClue",
    "http_backends",
    "mock_backends",
    "DEFAULT_INSTRUCTION",
    "PRESETS",
    "AppConfig",
    "PipelineConfig",
    "load_app_config",
    "EvalRecord",
    "EvalReport",
    "avg_response_time",
    "run_ablation",
    "run_eval",
    "topk_accuracy",
    "export_instructions",
    "load_dataset_jsonl",
    "validate_instruction_record",
    "EntityRecord",
    "KgSnapshot",
    "load_kg",
    "serialize_kg",
    "summarize_descriptions",
    "LinkResult",
    "MentionSample",
    "build_entity_context",
    "build_mention_context",
    "iav_score",
    "icr_score",
    "link",
    "link_topk",
    "run_tes",
    "Candidate",
    "CandidateSet",
    "lexical_score",
    "retrieve_topk",
    "create_app",
    "LinkTrace",
    "replay_prediction",
    "validate_trace",
]
