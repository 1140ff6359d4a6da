"""Single generate and evaluate exchanges, with bounded format re-asks."""

from __future__ import annotations

import logging

from ..errors import ExtractionFailed, PlanError, PlanFormatError, PromptError, ScoringError
from ..fsm_model import FsmPlan, check_integrity
from ..plan_text import locate_plan
from ..scoring import Evaluation, parse_evaluator_reply
from .backends import Backend, Transcript, TranscriptRecord, prompt_hash
from .prompts import PromptBundle

log = logging.getLogger(__name__)

GENERATOR_REMINDER = (
    "\n\n## FORMAT_REMINDER\nYour previous reply could not be used ({error}). "
    "Reply again with the complete plan as exactly one fenced ```json block in the sap-plan/1 "
    "document format shown in the example, with every transition referring to defined states."
)
EVALUATOR_REMINDER = (
    "\n\n## FORMAT_REMINDER\nYour previous reply could not be used ({error}). "
    "Reply again with exactly one fenced ```json block holding all seven scores (0 to 10) "
    "and a \"feedback\" string."
)


def _ask(
    backend: Backend, role: str, text: str, transcript: Transcript | None, round_index: int
) -> str:
    completion = backend.complete(role, text)
    if transcript is not None:
        transcript.append(
            TranscriptRecord(
                round=round_index,
                role=role,
                prompt_hash=prompt_hash(text),
                response=completion.text,
                timestamp=completion.timestamp,
                backend_label=backend.label,
            )
        )
    return completion.text


def generate_plan(
    backend: Backend,
    prompt: PromptBundle,
    transcript: Transcript | None = None,
    round_index: int = 1,
) -> tuple[FsmPlan, str]:
    """Ask for a plan; re-ask up to ``retry_budget`` times if none can be extracted.

    A reply counts as usable when a fenced block parses as a plan document and
    the plan passes referential integrity. Catalog alignment is left to scoring.
    """
    if prompt.role != "generator":
        raise PromptError(f"generate_plan needs a generator prompt, got {prompt.role}")
    budget = backend.settings.retry_budget
    text = prompt.rendered
    last: Exception | None = None
    for attempt in range(budget + 1):
        raw = _ask(backend, "generator", text, transcript, round_index)
        try:
            extracted = locate_plan(raw)
            check_integrity(extracted.plan)
        except (PlanFormatError, PlanError) as exc:
            last = exc
            log.info("generator reply unusable (attempt %d): %s", attempt + 1, exc)
            text = prompt.rendered + GENERATOR_REMINDER.format(error=exc)
            continue
        for w in extracted.warnings:
            log.info("skipped fenced block: %s", w)
        return extracted.plan, raw
    raise ExtractionFailed(f"no usable plan after {budget + 1} attempt(s): {last}", budget + 1, last)


def evaluate_plan(
    backend: Backend,
    prompt: PromptBundle,
    transcript: Transcript | None = None,
    round_index: int = 1,
) -> Evaluation:
    if prompt.role != "evaluator":
        raise PromptError(f"evaluate_plan needs an evaluator prompt, got {prompt.role}")
    budget = backend.settings.retry_budget
    text = prompt.rendered
    last: Exception | None = None
    for attempt in range(budget + 1):
        raw = _ask(backend, "evaluator", text, transcript, round_index)
        try:
            return parse_evaluator_reply(
                raw,
                plan_id=prompt.get("candidate_id"),
                evaluator_label=backend.label,
                benchmark_plan_id=prompt.get("benchmark_id"),
            )
        except ScoringError as exc:
            last = exc
            log.info("evaluator reply unusable (attempt %d): %s", attempt + 1, exc)
            text = prompt.rendered + EVALUATOR_REMINDER.format(error=exc)
    raise ExtractionFailed(f"no usable evaluation after {budget + 1} attempt(s): {last}", budget + 1, last)
