"""In-memory FSM plan model and the structural metrics computable without an LLM.

A plan is the triple of states, transitions and the actions fired on each
transition. All types here are frozen; build a new plan instead of mutating one.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Literal

from .errors import PlanError

if TYPE_CHECKING:
    from .action_catalog import ActionCatalog

IDENTIFIER = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

Severity = Literal["error", "warning"]


@dataclass(frozen=True)
class StateDef:
    name: str
    description: str = ""
    is_terminal: bool = False


@dataclass(frozen=True)
class ActionInvocation:
    """A plan-level helper and the catalog actions it decomposes into."""

    helper_name: str
    catalog_actions: tuple[str, ...] = ()
    target_objects: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "catalog_actions", tuple(self.catalog_actions))
        object.__setattr__(self, "target_objects", tuple(self.target_objects))


@dataclass(frozen=True)
class TransitionDef:
    source: str
    target: str
    trigger: str
    actions: tuple[ActionInvocation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class FsmPlan:
    states: tuple[StateDef, ...]
    initial_state: str
    transitions: tuple[TransitionDef, ...] = ()
    plan_id: str = ""
    source_model: str = ""
    round: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(self.transitions))

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.states)

    def state(self, name: str) -> StateDef:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass(frozen=True)
class Violation:
    severity: Severity
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"severity": v.severity, "location": v.location, "message": v.message}
                for v in self.violations
            ],
        }


@dataclass(frozen=True)
class StructuralMetrics:
    state_count: int
    transition_count: int
    reachable_state_fraction: float
    guarded_transition_fraction: float
    cyclomatic_complexity: int
    unaligned_action_count: int
    dead_state_names: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "state_count": self.state_count,
            "transition_count": self.transition_count,
            "reachable_state_fraction": self.reachable_state_fraction,
            "guarded_transition_fraction": self.guarded_transition_fraction,
            "cyclomatic_complexity": self.cyclomatic_complexity,
            "unaligned_action_count": self.unaligned_action_count,
            "dead_state_names": list(self.dead_state_names),
        }


def integrity_violations(plan: FsmPlan) -> list[Violation]:
    """Referential-integrity and naming errors only; no catalog checks."""
    out: list[Violation] = []
    if not plan.states:
        out.append(Violation("error", "states", "plan has no states"))
    seen: set[str] = set()
    for i, s in enumerate(plan.states):
        loc = f"states[{i}]"
        if not s.name or not IDENTIFIER.match(s.name):
            out.append(Violation("error", loc, f"invalid state name {s.name!r}"))
        if s.name in seen:
            out.append(Violation("error", loc, f"duplicate state name {s.name}"))
        seen.add(s.name)
    if plan.initial_state not in seen:
        out.append(
            Violation("error", "initial_state", f"undefined initial state {plan.initial_state}")
        )
    guards: set[tuple[str, str]] = set()
    for i, t in enumerate(plan.transitions):
        loc = f"transitions[{i}]"
        if t.source not in seen:
            out.append(Violation("error", loc, f"undefined source state {t.source}"))
        if t.target not in seen:
            out.append(Violation("error", loc, f"undefined target state {t.target}"))
        if not t.trigger.strip():
            out.append(Violation("error", loc, "empty trigger"))
        key = (t.source, t.trigger)
        if key in guards:
            out.append(
                Violation("error", loc, f"duplicate trigger {t.trigger!r} from state {t.source}")
            )
        guards.add(key)
        for j, a in enumerate(t.actions):
            if not IDENTIFIER.match(a.helper_name):
                out.append(
                    Violation("error", f"{loc}.actions[{j}]", f"invalid helper name {a.helper_name!r}")
                )
    return out


def check_integrity(plan: FsmPlan) -> None:
    errors = integrity_violations(plan)
    if errors:
        raise PlanError("; ".join(f"{v.location}: {v.message}" for v in errors))


def validate_plan(plan: FsmPlan, catalog: ActionCatalog | None = None) -> ValidationReport:
    """Check every plan invariant; violations are returned, never raised.

    With a catalog, every helper's catalog actions must resolve in it.
    """
    out = integrity_violations(plan)
    if not plan.transitions:
        out.append(Violation("warning", "transitions", "no transitions"))
    for i, t in enumerate(plan.transitions):
        loc = f"transitions[{i}]"
        if not t.actions:
            out.append(Violation("warning", loc, "transition fires no actions"))
        if catalog is None:
            continue
        for j, a in enumerate(t.actions):
            aloc = f"{loc}.actions[{j}]"
            if not a.catalog_actions:
                out.append(
                    Violation("error", aloc, f"helper {a.helper_name} lists no catalog actions")
                )
            for name in a.catalog_actions:
                if catalog.resolve(name) is None:
                    out.append(
                        Violation(
                            "error",
                            aloc,
                            f"helper {a.helper_name} uses unknown catalog action {name}",
                        )
                    )
    return ValidationReport(tuple(out))


def _weak_components(names: Iterable[str], edges: Iterable[tuple[str, str]]) -> int:
    parent = {n: n for n in names}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = len(parent)
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            components -= 1
    return components


def cyclomatic_complexity(plan: FsmPlan) -> int:
    """E - N + 2P, with P counted over weakly connected components."""
    check_integrity(plan)
    edges = [(t.source, t.target) for t in plan.transitions]
    p = _weak_components(plan.state_names, edges)
    return len(edges) - len(plan.states) + 2 * p


def reachable_states(plan: FsmPlan) -> set[str]:
    succ: dict[str, list[str]] = {n: [] for n in plan.state_names}
    for t in plan.transitions:
        succ[t.source].append(t.target)
    seen = {plan.initial_state}
    queue = deque([plan.initial_state])
    while queue:
        for nxt in succ[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def action_alignment(
    plan: FsmPlan, catalog: ActionCatalog
) -> tuple[int, list[tuple[str, str]]]:
    """Count catalog-resolvable action references; list every miss per occurrence."""
    aligned = 0
    unaligned: list[tuple[str, str]] = []
    for t in plan.transitions:
        for a in t.actions:
            for name in a.catalog_actions:
                if catalog.resolve(name) is None:
                    unaligned.append((a.helper_name, name))
                else:
                    aligned += 1
    return aligned, unaligned


def reachability_metrics(plan: FsmPlan, catalog: ActionCatalog | None = None) -> StructuralMetrics:
    """Deterministic structural proxies for the coverage dimensions.

    The unaligned-action count is only computed when a catalog is supplied.
    A plan with no transitions has a guarded fraction of 1.0 (vacuously).
    """
    cc = cyclomatic_complexity(plan)
    reach = reachable_states(plan)
    n_trans = len(plan.transitions)
    guarded = sum(1 for t in plan.transitions if t.trigger.strip())
    unaligned = len(action_alignment(plan, catalog)[1]) if catalog is not None else 0
    return StructuralMetrics(
        state_count=len(plan.states),
        transition_count=n_trans,
        reachable_state_fraction=len(reach) / len(plan.states),
        guarded_transition_fraction=guarded / n_trans if n_trans else 1.0,
        cyclomatic_complexity=cc,
        unaligned_action_count=unaligned,
        dead_state_names=tuple(n for n in plan.state_names if n not in reach),
    )
