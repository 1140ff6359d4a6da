"""Situational-awareness FSM planning: plan model, scoring, RBS and the
generate/evaluate refinement loop."""

from .action_catalog import ActionCatalog, default_catalog, load_catalog, resolve_action
from .fsm_model import (
    ActionInvocation,
    FsmPlan,
    StateDef,
    StructuralMetrics,
    TransitionDef,
    ValidationReport,
    action_alignment,
    cyclomatic_complexity,
    reachability_metrics,
    validate_plan,
)
from .loop_engine import BenchmarkRegistry, LoopConfig, LoopResult, promote_benchmark, run_sap_loop
from .plan_text import (
    PlanDocument,
    extract_plan_from_response,
    parse_plan,
    serialize_plan,
    to_dot,
)
from .rbs import (
    RankingRecord,
    RbsReport,
    ScenarioScores,
    aggregate_rbs,
    rank_scenario,
    ranking_agreement,
)
from .scenario_store import Corpus, Scenario, get_benchmark, load_corpus
from .scoring import DimensionScores, Evaluation, overall_score, parse_evaluator_reply

__version__ = "0.1.0"
