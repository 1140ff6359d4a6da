"""Hazard scenario corpus: JSON Lines ingestion and benchmark lookup.

One record per line::

    {"scenario_id": "...", "description": "...", "concepts": ["..."],
     "complexity_level": 1, "benchmark_plan": {<plan document>} | null,
     "provenance": "authored"}

Concepts are taken as given by the corpus author; nothing is extracted from
the description text.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import CorpusError, PlanFormatError
from .fsm_model import FsmPlan, validate_plan
from .plan_text import document_from_dict, plan_to_dict

if TYPE_CHECKING:
    from .action_catalog import ActionCatalog

LEVELS = (1, 2, 3, 4)
_KEYS = {"scenario_id", "description", "concepts", "complexity_level", "benchmark_plan", "provenance"}


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    description: str
    concepts: frozenset[str]
    complexity_level: int
    benchmark_plan: FsmPlan | None = None
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "concepts", frozenset(self.concepts))
        if self.complexity_level not in LEVELS:
            raise CorpusError(f"complexity_level must be one of {LEVELS}, got {self.complexity_level!r}")
        if not self.description.strip():
            raise CorpusError("description must be non-empty")
        if not self.concepts:
            raise CorpusError("concepts must be non-empty")


@dataclass(frozen=True)
class Corpus:
    scenarios: tuple[Scenario, ...]

    @property
    def level_histogram(self) -> dict[int, int]:
        counts = Counter(s.complexity_level for s in self.scenarios)
        return {lvl: counts.get(lvl, 0) for lvl in LEVELS}

    def ids(self) -> list[str]:
        return [s.scenario_id for s in self.scenarios]

    def get(self, scenario_id: str) -> Scenario:
        for s in self.scenarios:
            if s.scenario_id == scenario_id:
                return s
        raise CorpusError(f"unknown scenario_id {scenario_id!r}")

    def levels(self) -> dict[str, int]:
        return {s.scenario_id: s.complexity_level for s in self.scenarios}


def scenario_from_dict(rec: dict, catalog: ActionCatalog | None = None) -> Scenario:
    if not isinstance(rec, dict):
        raise CorpusError("record must be a JSON object")
    unknown = rec.keys() - _KEYS
    if unknown:
        raise CorpusError(f"unknown key(s) {sorted(unknown)}")
    for key in ("scenario_id", "description", "concepts", "complexity_level"):
        if key not in rec:
            raise CorpusError(f"missing required key {key!r}")
    sid, desc, concepts, level = (
        rec["scenario_id"], rec["description"], rec["concepts"], rec["complexity_level"]
    )
    if not isinstance(sid, str) or not sid:
        raise CorpusError("scenario_id must be a non-empty string")
    if not isinstance(desc, str):
        raise CorpusError("description must be a string")
    if not isinstance(concepts, list) or not all(isinstance(c, str) for c in concepts):
        raise CorpusError("concepts must be a list of strings")
    if not isinstance(level, int) or isinstance(level, bool):
        raise CorpusError("complexity_level must be an integer")

    plan = None
    if rec.get("benchmark_plan") is not None:
        try:
            plan = document_from_dict(rec["benchmark_plan"]).plan
        except PlanFormatError as exc:
            raise CorpusError(f"benchmark plan: {exc}") from None
        report = validate_plan(plan, catalog)
        if not report.ok:
            raise CorpusError(
                "invalid benchmark plan: " + "; ".join(f"{v.location}: {v.message}" for v in report.errors)
            )
    return Scenario(
        scenario_id=sid,
        description=desc,
        concepts=frozenset(c.strip() for c in concepts if c.strip()),
        complexity_level=level,
        benchmark_plan=plan,
        provenance=rec.get("provenance", ""),
    )


def load_corpus(source: str, catalog: ActionCatalog | None = None) -> Corpus:
    """Parse JSON Lines corpus text. Blank lines are skipped.

    Errors name the 0-based record index.
    """
    scenarios: list[Scenario] = []
    seen: set[str] = set()
    index = 0
    for line in source.splitlines():
        if not line.strip():
            continue
        try:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}") from None
            scenario = scenario_from_dict(rec, catalog)
            if scenario.scenario_id in seen:
                raise CorpusError(f"duplicate scenario_id {scenario.scenario_id!r}")
        except CorpusError as exc:
            raise CorpusError(f"record {index}: {exc}") from None
        seen.add(scenario.scenario_id)
        scenarios.append(scenario)
        index += 1
    return Corpus(tuple(scenarios))


def load_corpus_file(path: str | Path, catalog: ActionCatalog | None = None) -> Corpus:
    return load_corpus(Path(path).read_text(encoding="utf-8"), catalog)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "scenario_id": s.scenario_id,
        "description": s.description,
        "concepts": sorted(s.concepts),
        "complexity_level": s.complexity_level,
        "benchmark_plan": plan_to_dict(s.benchmark_plan) if s.benchmark_plan else None,
        "provenance": s.provenance,
    }


def dump_corpus(corpus: Corpus) -> str:
    return "".join(json.dumps(scenario_to_dict(s), ensure_ascii=False) + "\n" for s in corpus.scenarios)


def get_benchmark(corpus: Corpus, scenario_id: str) -> FsmPlan | None:
    return corpus.get(scenario_id).benchmark_plan


def sample_corpus_text() -> str:
    return resources.files("llmsap.data").joinpath("sample_corpus.jsonl").read_text(encoding="utf-8")


def sample_corpus() -> Corpus:
    return load_corpus(sample_corpus_text())
