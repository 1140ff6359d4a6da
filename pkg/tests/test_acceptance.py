"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL] criterion N: ...`` line (visible
with ``pytest -s``) and then asserts.
"""

import itertools
import json
import math
import random
import time
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import evaluator_reply, make_plan, plan_reply, random_digraph
from llmsap.action_catalog import default_catalog
from llmsap.agents import ReplayBackend, ScriptedBackend, default_exemplar
from llmsap.fsm_model import ActionInvocation, FsmPlan, StateDef, TransitionDef, cyclomatic_complexity
from llmsap.loop_engine import BenchmarkRegistry, LoopConfig, run_corpus, run_sap_loop
from llmsap.plan_text import parse_plan, serialize_plan
from llmsap.rbs import (
    RankingRecord,
    ScenarioScores,
    aggregate_rbs,
    human_table,
    rank_scenario,
    ranking_agreement,
    read_rank_csv,
)
from llmsap.scenario_store import Corpus, sample_corpus
from llmsap.scoring import DIMENSIONS, DimensionScores, overall_score, parse_evaluator_reply

CATALOG = default_catalog()
CORPUS = sample_corpus()
SCENE = CORPUS.scenarios[0]
EXEMPLAR = default_exemplar()


def verdict(n, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        ok = ok and elapsed < limit
        detail += f" ({elapsed:.3f}s, limit {limit}s)"
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


def test_criterion_01_rbs_reproduction():
    expected = {"GPT-4+SAP": 1.21, "GPT-4": 2.04, "GPT-3.5+SAP": 3.08, "GPT-3.5": 3.71}
    t0 = time.perf_counter()
    report = aggregate_rbs(read_rank_csv(human_table("rounded_average")))
    elapsed = time.perf_counter() - t0
    got = {m: report.per_model[m] for m in expected}
    ok = report.scenario_count == 24 and all(abs(got[m] - v) <= 0.005 for m, v in expected.items())
    detail = ", ".join(f"{m}={got[m]:.4f}" for m in expected)
    verdict(1, ok, f"human RBS {detail}", elapsed, 1.0)


def test_criterion_02_pair_conservation():
    rng = random.Random(20240214)
    t0 = time.perf_counter()
    bad = 0
    for trial in range(1000):
        n = rng.randint(1, 30)
        recs = [
            rank_scenario(ScenarioScores(f"t{trial}s{i}", {"A": rng.randint(0, 70), "B": rng.randint(0, 70)}))
            for i in range(n)
        ]
        rep = aggregate_rbs(recs)
        exact = sum(Fraction(r.ranks["A"]) + Fraction(r.ranks["B"]) for r in recs) / n
        bad += exact != 3 or rep.per_model["A"] + rep.per_model["B"] != 3
    elapsed = time.perf_counter() - t0
    verdict(2, bad == 0, f"R_A + R_B == 3 in {1000 - bad}/1000 trials", elapsed, 1.0)


def _mean_position_oracle(totals):
    labels = list(totals)
    acc = {m: Fraction(0) for m in labels}
    perms = list(itertools.permutations(labels))
    for perm in perms:
        for pos, m in enumerate(sorted(perm, key=lambda x: -totals[x]), start=1):
            acc[m] += pos
    return {m: acc[m] / len(perms) for m in labels}


def test_criterion_03_tie_rule():
    t0 = time.perf_counter()
    pair = rank_scenario(ScenarioScores("p", {"a": 55, "b": 55})).ranks
    ok = pair == {"a": 1.5, "b": 1.5}
    patterns = set()
    for k in range(2, 6):
        for levels in itertools.product(range(k), repeat=k):
            # dense-rank the levels so each weak ordering appears once
            patterns.add(tuple(sorted(set(levels)).index(v) for v in levels))
    for levels in sorted(patterns):
        totals = {f"m{i}": v for i, v in enumerate(levels)}
        ok &= rank_scenario(ScenarioScores("s", totals)).ranks == _mean_position_oracle(totals)
    checked = len(patterns)
    elapsed = time.perf_counter() - t0
    verdict(3, ok, f"pair tie (1.5, 1.5) and {checked} k<=5 tie patterns match oracle", elapsed, 5.0)


def test_criterion_04_agreement_arithmetic():
    matching = [RankingRecord(f"s{i}", {"a": 1, "b": 2}) for i in range(53)]
    differing = [RankingRecord(f"s{i}", {"a": 1, "b": 2}) for i in range(53, 70)]
    reference = matching + [RankingRecord(r.scenario_id, {"a": 2, "b": 1}) for r in differing]
    result = ranking_agreement(matching + differing, reference)
    ok = (result.matches, result.total) == (53, 70) and round(result.fraction, 3) == 0.757
    verdict(4, ok, f"{result.matches}/{result.total} -> {result.fraction:.3f}")


def _rank_oracle(plan):
    # E + N - 2 * rank(B) for the oriented incidence matrix B
    idx = {n: i for i, n in enumerate(plan.state_names)}
    b = np.zeros((len(idx), max(1, len(plan.transitions))))
    for j, t in enumerate(plan.transitions):
        if t.source != t.target:
            b[idx[t.source], j] = 1
            b[idx[t.target], j] = -1
    rank = np.linalg.matrix_rank(b) if plan.transitions else 0
    return len(plan.transitions) + len(idx) - 2 * int(rank)


def _nx_oracle(plan):
    g = nx.MultiDiGraph()
    g.add_nodes_from(plan.state_names)
    g.add_edges_from((t.source, t.target) for t in plan.transitions)
    return g.number_of_edges() - g.number_of_nodes() + 2 * nx.number_weakly_connected_components(g)


def test_criterion_05_cyclomatic_complexity():
    rng = random.Random(5)
    plans = [random_digraph(rng, 12) for _ in range(500)]
    t0 = time.perf_counter()
    mismatches = sum(
        not (cyclomatic_complexity(p) == _nx_oracle(p) == _rank_oracle(p)) for p in plans
    )
    elapsed = time.perf_counter() - t0
    verdict(5, mismatches == 0, f"{500 - mismatches}/500 random digraphs match both oracles", elapsed, 5.0)


def test_criterion_06_catalog_integrity():
    counts = tuple(len(CATALOG.in_category(c.name)) for c in CATALOG.categories)
    ok = counts == (8, 6, 15, 14, 8, 5) and sum(counts) == 56 == len(CATALOG)
    verdict(6, ok, f"category counts {counts}, total {sum(counts)}")


def _random_plan(rng):
    ids = CATALOG.ids()
    alphabet = "abcXYZ _-./é中\"\\\n\t"
    text = lambda n: "".join(rng.choice(alphabet) for _ in range(rng.randint(0, n)))
    names = rng.sample([f"S{i}" for i in range(40)], rng.randint(1, 10))
    states = tuple(StateDef(n, text(15), rng.random() < 0.3) for n in names)
    transitions, used = [], set()
    for i in range(rng.randint(0, 2 * len(names))):
        src = rng.choice(names)
        trigger = f"when {text(8)} #{i}"
        if (src, trigger) in used:
            continue
        used.add((src, trigger))
        actions = tuple(
            ActionInvocation(f"h{j}", tuple(rng.sample(ids, rng.randint(0, 3))), tuple(text(6) for _ in range(rng.randint(0, 2))))
            for j in range(rng.randint(0, 2))
        )
        transitions.append(TransitionDef(src, rng.choice(names), trigger, actions))
    return FsmPlan(states, rng.choice(names), tuple(transitions), text(10), text(10), rng.randint(0, 9))


def test_criterion_07_parser_round_trip():
    rng = random.Random(7)
    plans = [_random_plan(rng) for _ in range(1000)]
    t0 = time.perf_counter()
    failures = 0
    for p in plans:
        text = serialize_plan(p)
        failures += parse_plan(text) != p or serialize_plan(p).encode() != text.encode()
    elapsed = time.perf_counter() - t0
    verdict(7, failures == 0, f"{1000 - failures}/1000 plans round-trip byte-deterministically", elapsed, 5.0)


def _candidate(tag):
    return make_plan(["Watch", "Act"], [("Watch", "Act", f"hazard {tag}"), ("Act", "Watch", "safe")])


def _loop(scores, bench, feedback=None, **cfg):
    gen = ScriptedBackend([plan_reply(_candidate(i)) for i in range(len(scores))], label="gen")
    feedback = feedback or ["tighten the triggers"] * len(scores)
    ev = ScriptedBackend(
        [evaluator_reply(bench, "reference")] + [evaluator_reply(s, f) for s, f in zip(scores, feedback)],
        label="judge",
    )
    return run_sap_loop(SCENE, CATALOG, EXEMPLAR, gen, ev, LoopConfig(**cfg)), gen


def test_criterion_08_loop_semantics():
    t0 = time.perf_counter()
    a, _ = _loop([7.0], 6.5)
    ok_a = a.converged and a.iterations_used == 1

    fb = "Add a state that moves the child away from the stove first."
    b, gen = _loop([6.0, 7.2], 7.0, feedback=[fb, "good"])
    ok_b = b.converged and b.iterations_used == 2 and fb in gen.prompts[1][1] and fb not in gen.prompts[0][1]

    c, _ = _loop([6.0, 8.0, 7.0], 9.0, max_iterations=3)
    ok_c = not c.converged and c.adopted_evaluation.overall == 8.0 and c.adopted_plan.round == 2

    def g(role, prompt):
        return plan_reply(_candidate(len(prompt) % 5))

    def e(role, prompt):
        return evaluator_reply(6.0 + len(prompt) % 3, "note")

    subset = Corpus(CORPUS.scenarios[:4])
    recorded = run_corpus(
        subset, CATALOG, EXEMPLAR, ScriptedBackend(g, label="gen"), ScriptedBackend(e, label="judge"),
        LoopConfig(max_iterations=3),
    )
    records = [r for res in recorded for r in res.transcript.records]
    runs = []
    for _ in range(2):
        res = run_corpus(
            subset, CATALOG, EXEMPLAR, ReplayBackend(records, label="gen"), ReplayBackend(records, label="judge"),
            LoopConfig(max_iterations=3),
        )
        runs.append(b"".join(r.transcript.to_jsonl().encode() for r in res))
    ok_d = runs[0] == runs[1] and len(runs[0]) > 0
    elapsed = time.perf_counter() - t0
    verdict(8, ok_a and ok_b and ok_c and ok_d, f"(a)={ok_a} (b)={ok_b} (c)={ok_c} (d)={ok_d}", elapsed, 2.0)


def test_criterion_09_benchmark_promotion():
    registry = BenchmarkRegistry(CORPUS)
    first_gen = ScriptedBackend([plan_reply(_candidate("first"))], label="gen")
    first_ev = ScriptedBackend([evaluator_reply(7.0), evaluator_reply(7.6)], label="judge")
    first = run_sap_loop(SCENE, CATALOG, EXEMPLAR, first_gen, first_ev, LoopConfig(promote_benchmark=True), registry)

    second_gen = ScriptedBackend([plan_reply(_candidate("second"))], label="gen")
    second_ev = ScriptedBackend([evaluator_reply(7.6), evaluator_reply(8.0)], label="judge")
    run_sap_loop(SCENE, CATALOG, EXEMPLAR, second_gen, second_ev, LoopConfig(), registry)
    # prompts[0] is the benchmark self-score, prompts[1] the round-1 candidate evaluation
    round1 = second_ev.prompts[1][1]
    bench = round1.split("## BENCHMARK_PLAN\n", 1)[1].split("\n## SCORING_CRITERIA", 1)[0]
    adopted = serialize_plan(first.adopted_plan).strip()
    human = serialize_plan(SCENE.benchmark_plan).strip()
    ok = first.converged and adopted in bench and human not in bench
    verdict(9, ok, f"round-1 benchmark is adopted plan {first.adopted_plan.plan_id}, not human demo")


_law_failures = []


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=7, max_size=7))
def _overall_law(values):
    got = overall_score(DimensionScores.from_sequence(values))
    if not math.isclose(got, math.fsum(values) / 7, rel_tol=1e-15, abs_tol=1e-15):
        _law_failures.append(values)


def test_criterion_10_overall_score_law():
    _law_failures.clear()
    _overall_law()
    obj = dict(zip(DIMENSIONS, (7, 8, 6, 9, 7, 8, 7)), feedback="ok", overall=9.5)
    ev = parse_evaluator_reply("```json\n" + json.dumps(obj) + "\n```")
    ok = not _law_failures and ev.overall == pytest.approx(52 / 7, abs=1e-12)
    verdict(10, ok, f"mean law held over 300 examples; reported 9.5 recomputed to {ev.overall:.4f}")
