"""Prompt assembly for the generator and evaluator roles."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal

from ..action_catalog import ActionCatalog
from ..errors import LeakageError, PlanError, PromptError
from ..fsm_model import FsmPlan, check_integrity
from ..plan_text import PlanDocument, parse_document, serialize_document, serialize_plan
from ..scenario_store import Scenario

Role = Literal["generator", "evaluator"]

GENERATOR_SECTIONS = ("scene_description", "sap_prompt", "action_list", "exemplar")
EVALUATOR_SECTIONS = ("candidate_plan", "benchmark_plan", "scoring_criteria")

PLAN_FORMAT_RULES = """\
Reply with exactly one fenced ```json block holding your plan in the same document format as the example: \
"format_version" must be "sap-plan/1"; "initial_state" names one of "states"; each state has "name" \
(letters, digits and underscores, starting with a letter), "description" and "is_terminal"; each transition \
has "from", "to", a non-empty "trigger" condition and "actions", a list of helpers with "helper", \
"catalog_actions" (identifiers from the action list only) and "targets"."""


@dataclass(frozen=True)
class PromptBundle:
    role: Role
    sections: tuple[tuple[str, str], ...]
    context: tuple[tuple[str, str], ...] = ()

    @property
    def section_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.sections)

    def section(self, name: str) -> str:
        for n, text in self.sections:
            if n == name:
                return text
        raise KeyError(name)

    def get(self, key: str, default: str = "") -> str:
        return dict(self.context).get(key, default)

    @property
    def rendered(self) -> str:
        return "\n\n".join(f"## {name.upper()}\n{text.rstrip()}" for name, text in self.sections) + "\n"


def _data_text(name: str) -> str:
    return resources.files("llmsap.data").joinpath(name).read_text(encoding="utf-8")


def default_sap_prompt() -> str:
    return _data_text("sap_prompt.txt")


def default_scoring_criteria() -> str:
    return _data_text("scoring_criteria.txt")


def default_exemplar() -> PlanDocument:
    return parse_document(_data_text("exemplar_plan.json"))


def load_template(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def render_action_list(catalog: ActionCatalog) -> str:
    lines = ["Use only these action identifiers in catalog_actions:"]
    for cat in catalog.categories:
        lines.append(f"[{cat.name}]")
        for action in catalog.in_category(cat.name):
            lines.append(f"- {action.id}: {action.description}" if action.description else f"- {action.id}")
    return "\n".join(lines)


def _fenced(text: str) -> str:
    return f"```json\n{text.rstrip()}\n```"


def build_generator_prompt(
    scenario: Scenario,
    catalog: ActionCatalog,
    exemplar: PlanDocument,
    feedback: str | None = None,
    sap_prompt: str | None = None,
) -> PromptBundle:
    if exemplar.scenario_id is not None and exemplar.scenario_id == scenario.scenario_id:
        raise LeakageError(f"exemplar belongs to the target scenario {scenario.scenario_id}")
    if scenario.benchmark_plan is not None and exemplar.plan == scenario.benchmark_plan:
        raise LeakageError(f"exemplar is the benchmark plan of scenario {scenario.scenario_id}")
    try:
        exemplar_text = serialize_document(exemplar)
    except PlanError as exc:
        raise PromptError(f"invalid exemplar plan: {exc}") from None

    scene = scenario.description.strip()
    scene += "\n\nKey elements: " + ", ".join(sorted(scenario.concepts))
    sections = [
        ("scene_description", scene),
        ("sap_prompt", (sap_prompt if sap_prompt is not None else default_sap_prompt()).strip()),
        ("action_list", render_action_list(catalog)),
        (
            "exemplar",
            "Example plan for a different scene. It shows the structure to follow, "
            "not a solution to this scene.\n" + _fenced(exemplar_text) + "\n\n" + PLAN_FORMAT_RULES,
        ),
    ]
    if feedback:
        sections.append(("feedback", "Evaluator feedback on your previous plan:\n" + feedback))
    return PromptBundle("generator", tuple(sections), (("scenario_id", scenario.scenario_id),))


def build_evaluator_prompt(
    candidate: FsmPlan, benchmark: FsmPlan | None, criteria: str
) -> PromptBundle:
    """``benchmark`` may be None only when the caller supplies its score externally."""
    if not criteria or not criteria.strip():
        raise PromptError("scoring criteria text is required")
    try:
        check_integrity(candidate)
        cand_text = _fenced(serialize_plan(candidate))
        if benchmark is not None:
            bench_text = _fenced(serialize_plan(benchmark))
        else:
            bench_text = "(no benchmark plan is available for this scene)"
    except PlanError as exc:
        raise PromptError(f"invalid plan: {exc}") from None
    sections = (
        ("candidate_plan", "Plan to score:\n" + cand_text),
        ("benchmark_plan", "High-quality reference plan:\n" + bench_text),
        ("scoring_criteria", criteria.strip()),
    )
    context = (
        ("candidate_id", candidate.plan_id),
        ("benchmark_id", benchmark.plan_id if benchmark is not None else ""),
    )
    return PromptBundle("evaluator", sections, context)
