"""Seven-dimension plan scores and evaluator-reply parsing."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields

from .errors import MissingDimensionError, NoReplyBlockError, ScoreRangeError, ScoringError
from .plan_text import fenced_blocks

log = logging.getLogger(__name__)

DIMENSIONS: tuple[str, ...] = (
    "state_coverage",
    "transition_coverage",
    "cyclomatic_complexity_score",
    "safety_mindset",
    "scalability",
    "assistance_ux",
    "actions_set_alignment",
)

SCORE_MIN, SCORE_MAX = 0.0, 10.0


@dataclass(frozen=True)
class DimensionScores:
    state_coverage: float
    transition_coverage: float
    cyclomatic_complexity_score: float
    safety_mindset: float
    scalability: float
    assistance_ux: float
    actions_set_alignment: float

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
                raise ScoringError(f"{f.name}: expected a number, got {v!r}")
            if not SCORE_MIN <= v <= SCORE_MAX:
                raise ScoreRangeError(f"{f.name}={v} outside [0, 10]")
            object.__setattr__(self, f.name, float(v))

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, d) for d in DIMENSIONS)

    @classmethod
    def from_sequence(cls, values) -> DimensionScores:
        values = list(values)
        if len(values) != len(DIMENSIONS):
            raise ScoringError(f"expected {len(DIMENSIONS)} scores, got {len(values)}")
        return cls(*values)


def overall_score(scores: DimensionScores) -> float:
    """Unweighted mean of the seven dimensions."""
    return math.fsum(scores.values()) / len(DIMENSIONS)


@dataclass(frozen=True)
class Evaluation:
    plan_id: str
    scores: DimensionScores
    feedback: str
    evaluator_label: str = ""
    benchmark_plan_id: str = ""

    @property
    def overall(self) -> float:
        return overall_score(self.scores)

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "scores": asdict(self.scores),
            "overall": self.overall,
            "feedback": self.feedback,
            "evaluator_label": self.evaluator_label,
            "benchmark_plan_id": self.benchmark_plan_id,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Evaluation:
        scores = obj.get("scores")
        if not isinstance(scores, dict):
            raise ScoringError("evaluation record lacks a 'scores' object")
        missing = [d for d in DIMENSIONS if d not in scores]
        if missing:
            raise MissingDimensionError(f"missing dimension(s): {', '.join(missing)}")
        return cls(
            plan_id=obj.get("plan_id", ""),
            scores=DimensionScores(**{d: scores[d] for d in DIMENSIONS}),
            feedback=obj.get("feedback", ""),
            evaluator_label=obj.get("evaluator_label", ""),
            benchmark_plan_id=obj.get("benchmark_plan_id", ""),
        )


def serialize_evaluation(ev: Evaluation) -> str:
    return json.dumps(ev.to_dict(), ensure_ascii=False, sort_keys=True)


def deserialize_evaluation(text: str) -> Evaluation:
    return Evaluation.from_dict(json.loads(text))


def _reply_object(text: str) -> dict:
    for _, body in fenced_blocks(text):
        try:
            obj = json.loads(body)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict):
        return obj
    raise NoReplyBlockError("evaluator reply contains no fenced JSON object")


def parse_evaluator_reply(
    text: str,
    plan_id: str = "",
    evaluator_label: str = "",
    benchmark_plan_id: str = "",
) -> Evaluation:
    """Read the seven scores and feedback from the first fenced JSON object.

    A model-reported ``overall`` is never trusted; it is recomputed and any
    discrepancy is logged.
    """
    obj = _reply_object(text)
    missing = [d for d in DIMENSIONS if d not in obj]
    if missing:
        raise MissingDimensionError(f"missing dimension(s): {', '.join(missing)}")
    feedback = obj.get("feedback")
    if not isinstance(feedback, str):
        raise MissingDimensionError("missing 'feedback' string")
    ev = Evaluation(
        plan_id=plan_id,
        scores=DimensionScores(**{d: obj[d] for d in DIMENSIONS}),
        feedback=feedback,
        evaluator_label=evaluator_label,
        benchmark_plan_id=benchmark_plan_id,
    )
    reported = obj.get("overall")
    if isinstance(reported, (int, float)) and not math.isclose(reported, ev.overall, abs_tol=1e-9):
        log.warning(
            "evaluator reported overall %s but dimensions average %.4f; using the recomputed value",
            reported,
            ev.overall,
        )
    return ev
