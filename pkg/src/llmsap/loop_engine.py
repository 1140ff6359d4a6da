"""Iterative generate/evaluate refinement against a benchmark plan.

Round 1 generates without feedback and is scored against the benchmark.
While the candidate does not beat the benchmark score and the iteration budget
lasts, the evaluator's feedback is fed into the next generation. The
benchmark's own score comes from one evaluation of that plan, made with the
same evaluator at loop start.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

from .action_catalog import ActionCatalog
from .agents import (
    Backend,
    Transcript,
    build_evaluator_prompt,
    build_generator_prompt,
    default_scoring_criteria,
    evaluate_plan,
    generate_plan,
)
from .errors import CorpusError, LoopError, PlanError, SapError
from .fsm_model import FsmPlan, check_integrity
from .plan_text import PlanDocument, plan_from_dict, plan_to_dict
from .scenario_store import Corpus, Scenario
from .scoring import Evaluation

Acceptance = Literal["strict", "meet"]
_ACCEPTANCE_ALIASES = {
    "strict": "strict",
    "strict-exceed": "strict",
    "meet": "meet",
    "meet-or-exceed": "meet",
}


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = 5
    acceptance: Acceptance = "strict"
    promote_benchmark: bool = True
    benchmark_overall: float | None = None
    criteria: str | None = None
    sap_prompt: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if self.acceptance not in _ACCEPTANCE_ALIASES:
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")
        object.__setattr__(self, "acceptance", _ACCEPTANCE_ALIASES[self.acceptance])

    def accepts(self, candidate: float, benchmark: float) -> bool:
        return candidate > benchmark if self.acceptance == "strict" else candidate >= benchmark


@dataclass(frozen=True)
class RoundRecord:
    plan: FsmPlan
    evaluation: Evaluation


@dataclass(frozen=True)
class LoopResult:
    scenario_id: str
    adopted_plan: FsmPlan
    adopted_evaluation: Evaluation
    iterations_used: int
    converged: bool
    history: tuple[RoundRecord, ...]
    benchmark_overall: float
    benchmark_plan_id: str = ""
    transcript: Transcript | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "benchmark_plan_id": self.benchmark_plan_id,
            "benchmark_overall": self.benchmark_overall,
            "adopted_plan": plan_to_dict(self.adopted_plan),
            "adopted_evaluation": self.adopted_evaluation.to_dict(),
            "history": [
                {"plan": plan_to_dict(r.plan), "evaluation": r.evaluation.to_dict()}
                for r in self.history
            ],
        }


class BenchmarkRegistry:
    """Current benchmark per scenario.

    Human demos from the corpus are kept untouched; promoted plans shadow them.
    """

    def __init__(self, corpus: Corpus):
        self._human = {s.scenario_id: s.benchmark_plan for s in corpus.scenarios}
        self._promoted: dict[str, tuple[FsmPlan, float]] = {}
        self._lock = threading.Lock()

    def human_demo(self, scenario_id: str) -> FsmPlan | None:
        self._known(scenario_id)
        return self._human[scenario_id]

    def promoted(self, scenario_id: str) -> tuple[FsmPlan, float] | None:
        self._known(scenario_id)
        with self._lock:
            return self._promoted.get(scenario_id)

    def benchmark_for(self, scenario_id: str) -> FsmPlan | None:
        entry = self.promoted(scenario_id)
        return entry[0] if entry else self._human[scenario_id]

    def promote(self, scenario_id: str, plan: FsmPlan, overall: float) -> bool:
        """Store ``plan`` unless an equal or better-scoring one is already stored."""
        self._known(scenario_id)
        check_integrity(plan)
        with self._lock:
            current = self._promoted.get(scenario_id)
            if current is not None and current[1] >= overall:
                return False
            self._promoted[scenario_id] = (plan, overall)
            return True

    def _known(self, scenario_id: str) -> None:
        if scenario_id not in self._human:
            raise CorpusError(f"unknown scenario_id {scenario_id!r}")

    def to_dict(self) -> dict:
        with self._lock:
            return {
                sid: {"plan": plan_to_dict(plan), "overall": overall}
                for sid, (plan, overall) in sorted(self._promoted.items())
            }

    def load_promoted(self, obj: dict) -> None:
        for sid, entry in obj.items():
            self.promote(sid, plan_from_dict(entry["plan"]), float(entry["overall"]))


def promote_benchmark(
    registry: BenchmarkRegistry, scenario_id: str, result: LoopResult, enabled: bool = True
) -> bool:
    """Promote a converged run's adopted plan; returns whether the registry changed."""
    if not enabled or not result.converged:
        registry._known(scenario_id)
        return False
    return registry.promote(scenario_id, result.adopted_plan, result.adopted_evaluation.overall)


def run_sap_loop(
    scenario: Scenario,
    catalog: ActionCatalog,
    exemplar: PlanDocument,
    gen_backend: Backend,
    eval_backend: Backend,
    config: LoopConfig = LoopConfig(),
    registry: BenchmarkRegistry | None = None,
    transcript: Transcript | None = None,
) -> LoopResult:
    sid = scenario.scenario_id
    transcript = transcript if transcript is not None else Transcript()
    benchmark = registry.benchmark_for(sid) if registry is not None else scenario.benchmark_plan
    criteria = config.criteria or default_scoring_criteria()

    if benchmark is None and config.benchmark_overall is None:
        raise LoopError("no benchmark plan and no benchmark score supplied", 0, sid)
    if benchmark is not None:
        try:
            check_integrity(benchmark)
        except PlanError as exc:
            raise LoopError(f"invalid benchmark plan: {exc}", 0, sid) from exc

    if config.benchmark_overall is not None:
        bench_score = float(config.benchmark_overall)
    else:
        try:
            prompt = build_evaluator_prompt(benchmark, benchmark, criteria)
            bench_score = evaluate_plan(eval_backend, prompt, transcript, 0).overall
        except SapError as exc:
            raise LoopError(f"benchmark evaluation failed: {exc}", 0, sid) from exc

    history: list[RoundRecord] = []
    feedback: str | None = None
    converged = False
    for rnd in range(1, config.max_iterations + 1):
        try:
            gprompt = build_generator_prompt(scenario, catalog, exemplar, feedback, config.sap_prompt)
            plan, _ = generate_plan(gen_backend, gprompt, transcript, rnd)
            plan = replace(plan, plan_id=f"{sid}-r{rnd}", source_model=gen_backend.label, round=rnd)
            eprompt = build_evaluator_prompt(plan, benchmark, criteria)
            evaluation = evaluate_plan(eval_backend, eprompt, transcript, rnd)
        except SapError as exc:
            raise LoopError(str(exc), rnd, sid) from exc
        history.append(RoundRecord(plan, evaluation))
        if config.accepts(evaluation.overall, bench_score):
            converged = True
            break
        feedback = evaluation.feedback

    if converged:
        adopted = history[-1]
    else:
        # first round wins ties
        adopted = max(history, key=lambda r: r.evaluation.overall)
    result = LoopResult(
        scenario_id=sid,
        adopted_plan=adopted.plan,
        adopted_evaluation=adopted.evaluation,
        iterations_used=len(history),
        converged=converged,
        history=tuple(history),
        benchmark_overall=bench_score,
        benchmark_plan_id=benchmark.plan_id if benchmark is not None else "",
        transcript=transcript,
    )
    if registry is not None:
        promote_benchmark(registry, sid, result, config.promote_benchmark)
    return result


def run_corpus(
    corpus: Corpus,
    catalog: ActionCatalog,
    exemplar: PlanDocument,
    gen_backend: Backend,
    eval_backend: Backend,
    config: LoopConfig = LoopConfig(),
    registry: BenchmarkRegistry | None = None,
    workers: int = 1,
) -> list[LoopResult]:
    """One loop per scenario; results come back in corpus order."""

    def one(s: Scenario) -> LoopResult:
        return run_sap_loop(s, catalog, exemplar, gen_backend, eval_backend, config, registry)

    if workers <= 1:
        return [one(s) for s in corpus.scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, corpus.scenarios))
