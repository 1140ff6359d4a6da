"""Canonical plan documents: JSON (de)serialization, extraction from model
responses, and Graphviz DOT export.

Document layout (``format_version`` is always ``sap-plan/1``)::

    {
      "format_version": "sap-plan/1",
      "plan_id": "...", "source_model": "...", "round": 0,   # optional
      "scenario_id": "...",                                  # optional
      "initial_state": "Idle",
      "states": [{"name": "Idle", "description": "...", "is_terminal": false}],
      "transitions": [
        {"from": "Idle", "to": "Alert", "trigger": "...",
         "actions": [{"helper": "h", "catalog_actions": ["a"], "targets": ["x"]}]}
      ]
    }
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

from .errors import (
    BlockParseError,
    NoPlanFoundError,
    PlanFormatError,
    PlanSchemaError,
    PlanSyntaxError,
)
from .fsm_model import ActionInvocation, FsmPlan, StateDef, TransitionDef, check_integrity

FORMAT_VERSION = "sap-plan/1"

_REQUIRED_TOP = ("format_version", "initial_state", "states", "transitions")
_OPTIONAL_TOP = ("plan_id", "source_model", "round", "scenario_id")
_STATE_KEYS = {"name", "description", "is_terminal"}
_TRANSITION_KEYS = {"from", "to", "trigger", "actions"}
_ACTION_KEYS = {"helper", "catalog_actions", "targets"}


@dataclass(frozen=True)
class PlanDocument:
    plan: FsmPlan
    format_version: str = FORMAT_VERSION
    scenario_id: str | None = None
    raw_source: str | None = None


@dataclass(frozen=True)
class ExtractedPlan:
    plan: FsmPlan
    block_index: int
    offset: int
    warnings: tuple[str, ...] = ()


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise PlanSchemaError(msg)


def _check_keys(obj: Any, required: set[str], allowed: set[str], where: str) -> None:
    _expect(isinstance(obj, dict), f"{where}: expected an object")
    missing = required - obj.keys()
    _expect(not missing, f"{where}: missing required key(s) {sorted(missing)}")
    unknown = obj.keys() - allowed
    _expect(not unknown, f"{where}: unknown key(s) {sorted(unknown)}")


def _str(obj: dict, key: str, where: str, default: str | None = None) -> str:
    if key not in obj and default is not None:
        return default
    val = obj[key]
    _expect(isinstance(val, str), f"{where}.{key}: expected a string")
    return val


def _str_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    val = obj.get(key, [])
    _expect(
        isinstance(val, list) and all(isinstance(v, str) for v in val),
        f"{where}.{key}: expected a list of strings",
    )
    return tuple(val)


def document_from_dict(obj: Any) -> PlanDocument:
    _check_keys(obj, set(_REQUIRED_TOP), set(_REQUIRED_TOP) | set(_OPTIONAL_TOP), "document")
    version = _str(obj, "format_version", "document")
    _expect(version == FORMAT_VERSION, f"unsupported format_version {version!r}")
    rnd = obj.get("round", 0)
    _expect(
        isinstance(rnd, int) and not isinstance(rnd, bool) and rnd >= 0,
        "document.round: expected a non-negative integer",
    )
    scenario_id = obj.get("scenario_id")
    _expect(scenario_id is None or isinstance(scenario_id, str), "document.scenario_id: expected a string")

    _expect(isinstance(obj["states"], list), "document.states: expected an array")
    states = []
    for i, s in enumerate(obj["states"]):
        where = f"states[{i}]"
        _check_keys(s, {"name"}, _STATE_KEYS, where)
        term = s.get("is_terminal", False)
        _expect(isinstance(term, bool), f"{where}.is_terminal: expected a boolean")
        states.append(StateDef(_str(s, "name", where), _str(s, "description", where, ""), term))

    _expect(isinstance(obj["transitions"], list), "document.transitions: expected an array")
    transitions = []
    for i, t in enumerate(obj["transitions"]):
        where = f"transitions[{i}]"
        _check_keys(t, {"from", "to", "trigger"}, _TRANSITION_KEYS, where)
        raw_actions = t.get("actions", [])
        _expect(isinstance(raw_actions, list), f"{where}.actions: expected an array")
        actions = []
        for j, a in enumerate(raw_actions):
            awhere = f"{where}.actions[{j}]"
            _check_keys(a, {"helper"}, _ACTION_KEYS, awhere)
            actions.append(
                ActionInvocation(
                    _str(a, "helper", awhere),
                    _str_list(a, "catalog_actions", awhere),
                    _str_list(a, "targets", awhere),
                )
            )
        transitions.append(
            TransitionDef(
                _str(t, "from", where), _str(t, "to", where), _str(t, "trigger", where), tuple(actions)
            )
        )

    plan = FsmPlan(
        states=tuple(states),
        initial_state=_str(obj, "initial_state", "document"),
        transitions=tuple(transitions),
        plan_id=_str(obj, "plan_id", "document", ""),
        source_model=_str(obj, "source_model", "document", ""),
        round=rnd,
    )
    return PlanDocument(plan=plan, format_version=version, scenario_id=scenario_id)


def plan_from_dict(obj: Any) -> FsmPlan:
    return document_from_dict(obj).plan


def _load_json(text: str, base_offset: int = 0) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanSyntaxError(exc.msg, exc.lineno, exc.colno, base_offset + exc.pos) from None


def parse_document(text: str) -> PlanDocument:
    doc = document_from_dict(_load_json(text))
    return PlanDocument(doc.plan, doc.format_version, doc.scenario_id, raw_source=text)


def parse_plan(text: str) -> FsmPlan:
    """Parse a canonical document. Referential errors are left to ``validate_plan``."""
    return parse_document(text).plan


def plan_to_dict(plan: FsmPlan, scenario_id: str | None = None) -> dict:
    doc: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "plan_id": plan.plan_id,
        "source_model": plan.source_model,
        "round": plan.round,
    }
    if scenario_id is not None:
        doc["scenario_id"] = scenario_id
    doc["initial_state"] = plan.initial_state
    doc["states"] = [
        {"name": s.name, "description": s.description, "is_terminal": s.is_terminal}
        for s in plan.states
    ]
    doc["transitions"] = [
        {
            "from": t.source,
            "to": t.target,
            "trigger": t.trigger,
            "actions": [
                {
                    "helper": a.helper_name,
                    "catalog_actions": list(a.catalog_actions),
                    "targets": list(a.target_objects),
                }
                for a in t.actions
            ],
        }
        for t in plan.transitions
    ]
    return doc


def serialize_plan(plan: FsmPlan, scenario_id: str | None = None) -> str:
    check_integrity(plan)
    return json.dumps(plan_to_dict(plan, scenario_id), indent=2, ensure_ascii=False) + "\n"


def serialize_document(doc: PlanDocument) -> str:
    return serialize_plan(doc.plan, doc.scenario_id)


_FENCE_OPEN = re.compile(r"^[ ]{0,3}(`{3,}|~{3,})(.*)$")


def fenced_blocks(text: str) -> list[tuple[int, str]]:
    """Return ``(char_offset, content)`` for each fenced block.

    Backtick and tilde fences are both accepted with any info string. A fence
    left open at the end of the text runs to the end.
    """
    blocks: list[tuple[int, str]] = []
    lines = text.splitlines(keepends=True)
    pos = 0
    i = 0
    while i < len(lines):
        line = lines[i]
        m = _FENCE_OPEN.match(line.rstrip("\r\n"))
        if m and not (m.group(1)[0] == "`" and "`" in m.group(2)):
            fence = m.group(1)
            start = pos + len(line)
            body: list[str] = []
            pos += len(line)
            i += 1
            closer = re.compile(r"^[ ]{0,3}" + re.escape(fence[0]) + "{" + str(len(fence)) + r",}[ \t]*$")
            while i < len(lines) and not closer.match(lines[i].rstrip("\r\n")):
                body.append(lines[i])
                pos += len(lines[i])
                i += 1
            if i < len(lines):
                pos += len(lines[i])
                i += 1
            blocks.append((start, "".join(body)))
            continue
        pos += len(line)
        i += 1
    return blocks


def locate_plan(response: str) -> ExtractedPlan:
    """Parse the first fenced block that holds a canonical document.

    Errors from earlier failing blocks are kept as warnings.
    """
    blocks = fenced_blocks(response)
    if not blocks:
        raise NoPlanFoundError("response contains no fenced code block")
    failures: list[tuple[int, int, PlanFormatError]] = []
    for idx, (offset, body) in enumerate(blocks):
        try:
            plan = document_from_dict(_load_json(body, offset)).plan
        except PlanFormatError as exc:
            failures.append((idx, offset, exc))
            continue
        warnings = tuple(f"block {i} at offset {o}: {e}" for i, o, e in failures)
        return ExtractedPlan(plan, idx, offset, warnings)
    raise BlockParseError(failures)


def extract_plan_from_response(response: str) -> FsmPlan:
    return locate_plan(response).plan


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _edge_label(t: TransitionDef) -> str:
    helpers = "; ".join(f"{a.helper_name}({', '.join(a.catalog_actions)})" for a in t.actions)
    return f"{t.trigger} / {helpers}" if helpers else t.trigger


def to_dot(plan: FsmPlan) -> str:
    """Graphviz text: bold initial state, double-bordered terminal states."""
    check_integrity(plan)
    out = ["digraph plan {", "  rankdir=LR;", "  node [shape=ellipse];"]
    for s in plan.states:
        attrs = [f"label={_dot_quote(s.name)}"]
        if s.name == plan.initial_state:
            attrs.append('style="bold,filled"')
            attrs.append('fillcolor="lightgrey"')
        if s.is_terminal:
            attrs.append("peripheries=2")
        out.append(f"  {_dot_quote(s.name)} [{', '.join(attrs)}];")
    for t in plan.transitions:
        out.append(
            f"  {_dot_quote(t.source)} -> {_dot_quote(t.target)} [label={_dot_quote(_edge_label(t))}];"
        )
    out.append("}")
    return "\n".join(out) + "\n"
