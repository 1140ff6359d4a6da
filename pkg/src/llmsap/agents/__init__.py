from .backends import (
    Backend,
    BackendSettings,
    Completion,
    LiveBackend,
    ReplayBackend,
    ScriptedBackend,
    Transcript,
    TranscriptRecord,
    backend_from_config,
    load_transcript,
    prompt_hash,
    read_transcript,
)
from .prompts import (
    EVALUATOR_SECTIONS,
    GENERATOR_SECTIONS,
    PromptBundle,
    build_evaluator_prompt,
    build_generator_prompt,
    default_exemplar,
    default_sap_prompt,
    default_scoring_criteria,
    render_action_list,
)
from .roles import evaluate_plan, generate_plan

__all__ = [
    "Backend",
    "BackendSettings",
    "Completion",
    "EVALUATOR_SECTIONS",
    "GENERATOR_SECTIONS",
    "LiveBackend",
    "PromptBundle",
    "ReplayBackend",
    "ScriptedBackend",
    "Transcript",
    "TranscriptRecord",
    "backend_from_config",
    "build_evaluator_prompt",
    "build_generator_prompt",
    "default_exemplar",
    "default_sap_prompt",
    "default_scoring_criteria",
    "evaluate_plan",
    "generate_plan",
    "load_transcript",
    "prompt_hash",
    "read_transcript",
    "render_action_list",
]
