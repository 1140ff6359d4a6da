"""Rank-based scoring (RBS).

Each scenario ranks its models by total score, highest first, with tied
models sharing the mean of the positions they span. A model's RBS is the
mean of its ranks over the scenarios it took part in, so 1.0 is best.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

from .errors import RbsError

_MISSING = {"", "none", "null", "na", "n/a"}


@dataclass(frozen=True)
class ScenarioScores:
    scenario_id: str
    totals: Mapping[str, float]


@dataclass(frozen=True)
class RankingRecord:
    scenario_id: str
    ranks: Mapping[str, float]

    def __post_init__(self) -> None:
        k = len(self.ranks)
        if k == 0:
            raise RbsError(f"scenario {self.scenario_id}: no ranked models")
        expected = k * (k + 1) / 2
        got = math.fsum(self.ranks.values())
        if not math.isclose(got, expected, abs_tol=1e-9):
            raise RbsError(
                f"scenario {self.scenario_id}: ranks sum to {got}, expected {expected} for {k} models"
            )
        for label, r in self.ranks.items():
            if not 1 <= r <= k:
                raise RbsError(f"scenario {self.scenario_id}: rank {r} for {label} outside [1, {k}]")

    def ordering(self) -> list[frozenset[str]]:
        """Tie blocks from best to worst."""
        by_rank: dict[float, set[str]] = {}
        for label, r in self.ranks.items():
            by_rank.setdefault(r, set()).add(label)
        return [frozenset(by_rank[r]) for r in sorted(by_rank)]

    def to_dict(self) -> dict:
        return {"scenario_id": self.scenario_id, "ranks": dict(self.ranks)}


@dataclass(frozen=True)
class RbsReport:
    per_model: dict[str, float]
    counts: dict[str, int]
    scenario_count: int
    by_level: dict[int, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {
            "scenario_count": self.scenario_count,
            "per_model": self.per_model,
            "counts": self.counts,
        }
        if self.by_level:
            out["by_level"] = {str(lvl): v for lvl, v in sorted(self.by_level.items())}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self, digits: int = 2) -> str:
        levels = sorted(self.by_level)
        header = ["model", "overall"] + [f"level {lvl}" for lvl in levels]
        rows = [header]
        for label, score in self.per_model.items():
            row = [label, f"{score:.{digits}f}"]
            for lvl in levels:
                v = self.by_level[lvl].get(label)
                row.append("-" if v is None else f"{v:.{digits}f}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = []
        for n, row in enumerate(rows):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Agreement:
    matches: int
    total: int

    @property
    def fraction(self) -> float:
        return self.matches / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"matches": self.matches, "total": self.total, "fraction": self.fraction}


def rank_scenario(scores: ScenarioScores) -> RankingRecord:
    if len(scores.totals) < 2:
        raise RbsError(f"scenario {scores.scenario_id}: need at least 2 models to rank")
    ordered = sorted(scores.totals.items(), key=lambda kv: -kv[1])
    ranks: dict[str, float] = {}
    pos = 1
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1][1] == ordered[i][1]:
            j += 1
        span = j - i + 1
        shared = pos + (span - 1) / 2
        for label, _ in ordered[i : j + 1]:
            ranks[label] = shared
        pos += span
        i = j + 1
    # keep the caller's model order
    return RankingRecord(scores.scenario_id, {label: ranks[label] for label in scores.totals})


def aggregate_rbs(
    records: Iterable[RankingRecord], levels: Mapping[str, int] | None = None
) -> RbsReport:
    """Mean rank per model over the scenarios that model appears in.

    With ``levels`` (scenario_id -> complexity level) a per-level breakdown is
    added; scenarios missing from the mapping are left out of the breakdown.
    """
    records = list(records)
    if not records:
        raise RbsError("no ranking records to aggregate")
    sums: dict[str, list[float]] = {}
    level_sums: dict[int, dict[str, list[float]]] = {}
    for rec in records:
        lvl = levels.get(rec.scenario_id) if levels is not None else None
        for label, r in rec.ranks.items():
            sums.setdefault(label, []).append(r)
            if lvl is not None:
                level_sums.setdefault(lvl, {}).setdefault(label, []).append(r)

    def means(d: dict[str, list[float]]) -> dict[str, float]:
        return {label: math.fsum(v) / len(v) for label, v in d.items()}

    return RbsReport(
        per_model=means(sums),
        counts={label: len(v) for label, v in sums.items()},
        scenario_count=len(records),
        by_level={lvl: means(d) for lvl, d in sorted(level_sums.items())},
    )


def ranking_agreement(
    candidate: Iterable[RankingRecord], reference: Iterable[RankingRecord]
) -> Agreement:
    """Count scenarios whose full ordering, tie structure included, matches."""
    cand = {r.scenario_id: r for r in candidate}
    ref = {r.scenario_id: r for r in reference}
    if cand.keys() != ref.keys():
        raise RbsError(
            f"scenario ids differ: only in candidate {sorted(cand.keys() - ref.keys())}, "
            f"only in reference {sorted(ref.keys() - cand.keys())}"
        )
    matches = 0
    for sid, r in ref.items():
        c = cand[sid]
        if c.ranks.keys() != r.ranks.keys():
            raise RbsError(f"scenario {sid}: model sets differ")
        if c.ordering() == r.ordering():
            matches += 1
    return Agreement(matches, len(ref))


def _parse_rank(value: str, where: str) -> float | None:
    if value.strip().lower() in _MISSING:
        return None
    try:
        return float(value)
    except ValueError:
        raise RbsError(f"{where}: rank {value!r} is not a number") from None


def read_rank_csv(text: str) -> list[RankingRecord]:
    """Rows ``scenario_id,model_label,rank``; ``None`` ranks are dropped.

    Scenario order follows first appearance in the file.
    """
    reader = csv.DictReader(io.StringIO(text))
    need = {"scenario_id", "model_label", "rank"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise RbsError(f"CSV must have columns {sorted(need)}")
    grouped: dict[str, dict[str, float]] = {}
    for n, row in enumerate(reader, start=2):
        sid, label = row["scenario_id"].strip(), row["model_label"].strip()
        where = f"line {n}"
        rank = _parse_rank(row["rank"] or "", where)
        ranks = grouped.setdefault(sid, {})
        if label in ranks:
            raise RbsError(f"{where}: duplicate row for {label} in scenario {sid}")
        if rank is not None:
            ranks[label] = rank
    return [RankingRecord(sid, ranks) for sid, ranks in grouped.items() if ranks]


def read_levels_csv(text: str) -> dict[str, int]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"scenario_id", "complexity_level"} <= set(reader.fieldnames):
        raise RbsError("levels CSV must have columns scenario_id, complexity_level")
    return {row["scenario_id"].strip(): int(row["complexity_level"]) for row in reader}


def read_scores_jsonl(text: str) -> list[ScenarioScores]:
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "scenario_id" not in obj or not isinstance(obj.get("totals"), dict):
            raise RbsError(f"line {n}: expected {{scenario_id, totals}}")
        out.append(ScenarioScores(obj["scenario_id"], {k: float(v) for k, v in obj["totals"].items()}))
    return out


def read_records_jsonl(text: str) -> list[RankingRecord]:
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "scenario_id" not in obj or not isinstance(obj.get("ranks"), dict):
            raise RbsError(f"line {n}: expected {{scenario_id, ranks}}")
        out.append(RankingRecord(obj["scenario_id"], {k: float(v) for k, v in obj["ranks"].items()}))
    return out


def dump_records_jsonl(records: Iterable[RankingRecord]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in records)


def human_table(name: str = "rounded_average") -> str:
    """CSV text of a bundled human annotation table.

    ``name`` is one of ``annotator1``, ``annotator2``, ``annotator3``,
    ``rounded_average`` or ``levels``.
    """
    return (
        resources.files("llmsap.data")
        .joinpath("human_rankings", f"{name}.csv")
        .read_text(encoding="utf-8")
    )
