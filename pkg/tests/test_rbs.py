import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from llmsap.errors import RbsError
from llmsap.rbs import (
    RankingRecord,
    ScenarioScores,
    aggregate_rbs,
    dump_records_jsonl,
    human_table,
    rank_scenario,
    ranking_agreement,
    read_levels_csv,
    read_rank_csv,
    read_records_jsonl,
)

MODELS = ["GPT-4+SAP", "GPT-4", "GPT-3.5+SAP", "GPT-3.5", "Claude-2+SAP", "Claude-2"]


def brute_force_ranks(totals):
    """Average 1-based position of each model over every tie-breaking order."""
    labels = list(totals)
    acc = {m: Fraction(0) for m in labels}
    count = 0
    for perm in itertools.permutations(labels):
        ordered = sorted(perm, key=lambda m: -totals[m])  # stable
        for pos, m in enumerate(ordered, start=1):
            acc[m] += pos
        count += 1
    return {m: acc[m] / count for m in labels}


def scenario(sid, **totals):
    return ScenarioScores(sid, totals)


def test_two_models_distinct():
    assert rank_scenario(scenario("s", a=63, b=58)).ranks == {"a": 1, "b": 2}


def test_two_models_tied():
    assert rank_scenario(scenario("s", a=60, b=60)).ranks == {"a": 1.5, "b": 1.5}


def test_three_models_with_tie():
    totals = {"a": 70, "b": 70, "c": 50}
    got = rank_scenario(ScenarioScores("s", totals)).ranks
    assert got == {"a": 1.5, "b": 1.5, "c": 3}
    assert got == brute_force_ranks(totals)


@given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 4), min_size=2, max_size=6))
def test_matches_brute_force(totals):
    assert rank_scenario(ScenarioScores("s", totals)).ranks == brute_force_ranks(totals)


@given(st.dictionaries(st.text(min_size=1, max_size=4), st.integers(0, 70), min_size=2, max_size=8))
def test_rank_sum_and_monotonicity(totals):
    ranks = rank_scenario(ScenarioScores("s", totals)).ranks
    k = len(totals)
    assert sum(ranks.values()) == k * (k + 1) / 2
    for a, b in itertools.permutations(totals, 2):
        if totals[a] > totals[b]:
            assert ranks[a] < ranks[b]
        if totals[a] == totals[b]:
            assert ranks[a] == ranks[b]


@given(
    st.dictionaries(st.sampled_from("abcde"), st.integers(0, 70), min_size=2, max_size=5),
    st.integers(1, 9),
    st.integers(-20, 20),
)
def test_invariant_under_affine_rescaling(totals, scale, shift):
    scaled = {m: v * scale + shift for m, v in totals.items()}
    assert rank_scenario(ScenarioScores("s", scaled)).ranks == rank_scenario(ScenarioScores("s", totals)).ranks


def test_needs_two_models():
    with pytest.raises(RbsError):
        rank_scenario(scenario("s", a=1))


def test_record_rejects_bad_rank_sum():
    with pytest.raises(RbsError, match="sum"):
        RankingRecord("s", {"a": 1, "b": 1})


def test_single_record_aggregate_is_the_record():
    rec = rank_scenario(scenario("s", a=5, b=9, c=5))
    report = aggregate_rbs([rec])
    assert report.per_model == rec.ranks
    assert report.counts == {"a": 1, "b": 1, "c": 1}


def test_missing_models_use_own_denominator():
    recs = [RankingRecord("s1", {"a": 1, "b": 2, "c": 3}), RankingRecord("s2", {"a": 2, "b": 1})]
    report = aggregate_rbs(recs)
    assert report.per_model == {"a": 1.5, "b": 1.5, "c": 3.0}
    assert report.counts == {"a": 2, "b": 2, "c": 1}


def test_empty_aggregate_errors():
    with pytest.raises(RbsError):
        aggregate_rbs([])


HUMAN_OVERALL = {
    "GPT-4+SAP": 1.21, "GPT-4": 2.04, "GPT-3.5+SAP": 3.08,
    "GPT-3.5": 3.71, "Claude-2+SAP": 5.09, "Claude-2": 5.86,
}
HUMAN_BY_LEVEL = {
    1: [1.22, 1.78, 3.11, 4.00, 5.00, 5.86],
    2: [1.00, 2.00, 3.25, 3.75, 5.25, 5.75],
    3: [1.00, 2.40, 3.40, 3.20, 5.00, 6.00],
    4: [1.50, 2.17, 2.67, 3.67, 5.17, 5.83],
}


def test_human_table_reproduction():
    records = read_rank_csv(human_table("rounded_average"))
    report = aggregate_rbs(records, read_levels_csv(human_table("levels")))
    assert report.scenario_count == 24
    for m, v in HUMAN_OVERALL.items():
        assert report.per_model[m] == pytest.approx(v, abs=0.005)
    for lvl, row in HUMAN_BY_LEVEL.items():
        for m, v in zip(MODELS, row):
            assert report.by_level[lvl][m] == pytest.approx(v, abs=0.005), (lvl, m)
    assert report.counts["Claude-2"] == 22 and report.counts["GPT-4"] == 24


@pytest.mark.parametrize(
    "pair, expected",
    [(("GPT-4+SAP", "GPT-4"), (1.13, 1.88)), (("Claude-2+SAP", "Claude-2"), (1.14, 1.86))],
)
def test_pairwise_human_rbs(pair, expected):
    records = read_rank_csv(human_table("rounded_average"))
    pairwise = [
        rank_scenario(ScenarioScores(r.scenario_id, {m: -r.ranks[m] for m in pair}))
        for r in records
        if all(m in r.ranks for m in pair)
    ]
    report = aggregate_rbs(pairwise)
    for m, v in zip(pair, expected):
        assert report.per_model[m] == pytest.approx(v, abs=0.006)


def _random_record(rng, sid):
    totals = {m: rng.randint(0, 3) for m in "abcd"}
    return rank_scenario(ScenarioScores(sid, totals))


def test_agreement_identical():
    rng = random.Random(1)
    recs = [_random_record(rng, f"s{i}") for i in range(10)]
    assert ranking_agreement(recs, recs).to_dict() == {"matches": 10, "total": 10, "fraction": 1.0}


def test_agreement_53_of_70():
    rng = random.Random(2)
    ref = [_random_record(rng, f"s{i}") for i in range(70)]
    cand = list(ref)
    for i in range(17):
        r = ref[i]
        cand[i] = RankingRecord(r.scenario_id, {m: len(r.ranks) + 1 - v for m, v in r.ranks.items()})
        # an all-tied record flips onto itself; force a real difference
        if cand[i].ordering() == r.ordering():
            cand[i] = RankingRecord(r.scenario_id, dict(zip("abcd", (1, 2, 3, 4))))
            if cand[i].ordering() == r.ordering():
                cand[i] = RankingRecord(r.scenario_id, dict(zip("abcd", (4, 3, 2, 1))))
    result = ranking_agreement(cand, ref)
    assert (result.matches, result.total) == (53, 70)
    assert round(result.fraction, 3) == 0.757


def test_agreement_tie_structure_matters():
    ref = [
        RankingRecord("s1", {"a": 1, "b": 2}),
        RankingRecord("s2", {"a": 1.5, "b": 1.5}),
        RankingRecord("s3", {"a": 2, "b": 1}),
        RankingRecord("s4", {"a": 1, "b": 2, "c": 3}),
    ]
    cand = ref[:3] + [RankingRecord("s4", {"a": 1, "b": 2.5, "c": 2.5})]
    assert ranking_agreement(cand, ref).to_dict() == {"matches": 3, "total": 4, "fraction": 0.75}


def test_agreement_requires_same_scenarios():
    a = [RankingRecord("s1", {"a": 1, "b": 2})]
    b = [RankingRecord("s2", {"a": 1, "b": 2})]
    with pytest.raises(RbsError, match="differ"):
        ranking_agreement(a, b)


def test_csv_with_missing_entries():
    text = "scenario_id,model_label,rank\nq1,A,1\nq1,B,None\nq1,C,2\nq2,A,2\nq2,B,1\n"
    recs = read_rank_csv(text)
    assert [r.ranks for r in recs] == [{"A": 1, "C": 2}, {"A": 2, "B": 1}]
    assert aggregate_rbs(recs).counts == {"A": 2, "C": 1, "B": 1}


def test_csv_bad_rank():
    with pytest.raises(RbsError, match="line 2"):
        read_rank_csv("scenario_id,model_label,rank\nq1,A,first\n")


def test_records_jsonl_round_trip():
    recs = read_rank_csv(human_table("annotator1"))
    assert read_records_jsonl(dump_records_jsonl(recs)) == recs
    lines = dump_records_jsonl(recs).splitlines()
    assert json.loads(lines[0])["scenario_id"] == "q01"


def test_report_table_and_json():
    report = aggregate_rbs(read_rank_csv(human_table("rounded_average")))
    table = report.to_table()
    assert "1.21" in table and "5.86" in table
    assert json.loads(report.to_json())["scenario_count"] == 24
