"""Command-line entry point.

Exit status: 0 success, 1 validation or data errors, 2 backend or transport errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from . import rbs
from .action_catalog import ActionCatalog, default_catalog, load_catalog_file
from .agents import backend_from_config, default_exemplar
from .agents.prompts import load_template
from .errors import BackendError, ExtractionFailed, SapError
from .fsm_model import reachability_metrics, validate_plan
from .loop_engine import BenchmarkRegistry, LoopConfig, run_corpus
from .plan_text import PlanDocument, parse_document, parse_plan, to_dot
from .scenario_store import Corpus, load_corpus_file

log = logging.getLogger("llmsap")

EXIT_OK, EXIT_DATA, EXIT_BACKEND = 0, 1, 2
_MANIFEST_KEYS = {
    "run_id", "corpus", "catalog", "exemplar", "sap_prompt", "criteria", "backends",
    "loop", "output_dir", "workers", "benchmarks",
}


class CliError(SapError):
    pass


@dataclass
class RunManifest:
    run_id: str
    corpus_path: Path
    catalog_path: Path | None
    exemplar_path: Path | None
    sap_prompt_path: Path | None
    criteria_path: Path | None
    backends: dict
    loop: dict
    output_dir: Path
    workers: int
    benchmarks_path: Path | None
    base_dir: Path
    raw: dict

    @classmethod
    def load(cls, path: Path) -> RunManifest:
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise CliError(f"{path}: manifest must be a JSON object")
        unknown = raw.keys() - _MANIFEST_KEYS
        if unknown:
            raise CliError(f"{path}: unknown manifest key(s) {sorted(unknown)}")
        for key in ("run_id", "corpus", "backends"):
            if key not in raw:
                raise CliError(f"{path}: manifest needs {key!r}")
        base = path.parent.resolve()

        def opt(key: str) -> Path | None:
            if raw.get(key) is None:
                return None
            p = Path(raw[key])
            p = p if p.is_absolute() else base / p
            if not p.exists():
                raise CliError(f"{path}: {key} file {p} does not exist")
            return p

        backends = raw["backends"]
        if not isinstance(backends, dict) or not {"generator", "evaluator"} <= backends.keys():
            raise CliError(f"{path}: backends needs 'generator' and 'evaluator' entries")
        out = Path(raw.get("output_dir", "runs"))
        return cls(
            run_id=str(raw["run_id"]),
            corpus_path=opt("corpus"),
            catalog_path=opt("catalog"),
            exemplar_path=opt("exemplar"),
            sap_prompt_path=opt("sap_prompt"),
            criteria_path=opt("criteria"),
            backends=backends,
            loop=dict(raw.get("loop", {})),
            output_dir=out if out.is_absolute() else base / out,
            workers=int(raw.get("workers", 1)),
            benchmarks_path=opt("benchmarks"),
            base_dir=base,
            raw=raw,
        )


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _catalog(path: str | None) -> ActionCatalog:
    return load_catalog_file(path) if path else default_catalog()


def _records_from(path: str) -> list[rbs.RankingRecord]:
    text = _read(path)
    if path.endswith(".csv"):
        return rbs.read_rank_csv(text)
    if path.endswith((".jsonl", ".json")):
        first = next((line for line in text.splitlines() if line.strip()), "")
        if '"totals"' in first:
            return [rbs.rank_scenario(s) for s in rbs.read_scores_jsonl(text)]
        return rbs.read_records_jsonl(text)
    raise CliError(f"{path}: expected a .csv rank table or a .jsonl scores/records file")


def _levels_from(path: str) -> dict[str, int]:
    if path.endswith(".csv"):
        return rbs.read_levels_csv(_read(path))
    corpus = load_corpus_file(path)
    return corpus.levels()


def cmd_validate(args: argparse.Namespace) -> int:
    plan = parse_plan(_read(args.plan))
    report = validate_plan(plan, _catalog(args.catalog))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        for v in report.violations:
            print(v)
        print(f"{len(report.errors)} error(s), {len(report.warnings)} warning(s)")
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_metrics(args: argparse.Namespace) -> int:
    plan = parse_plan(_read(args.plan))
    print(json.dumps(reachability_metrics(plan, _catalog(args.catalog)).to_dict(), indent=2))
    return EXIT_OK


def cmd_dot(args: argparse.Namespace) -> int:
    sys.stdout.write(to_dot(parse_plan(_read(args.plan))))
    return EXIT_OK


def cmd_rbs(args: argparse.Namespace) -> int:
    records: list[rbs.RankingRecord] = []
    sources = [rbs.human_table(args.bundled)] if args.bundled else []
    for text in sources:
        records.extend(rbs.read_rank_csv(text))
    for path in args.files:
        records.extend(_records_from(path))
    if not records:
        raise CliError("no ranking input given")
    seen: set[str] = set()
    for r in records:
        if r.scenario_id in seen:
            raise CliError(f"scenario {r.scenario_id} appears in more than one input")
        seen.add(r.scenario_id)
    levels = None
    if args.by_level:
        if args.levels:
            levels = _levels_from(args.levels)
        elif args.bundled:
            levels = rbs.read_levels_csv(rbs.human_table("levels"))
        else:
            raise CliError("--by-level needs --levels FILE (CSV or corpus JSONL)")
    report = rbs.aggregate_rbs(records, levels)
    sys.stdout.write(report.to_json() + "\n" if args.json else report.to_table())
    return EXIT_OK


def cmd_agreement(args: argparse.Namespace) -> int:
    result = rbs.ranking_agreement(_records_from(args.candidate), _records_from(args.reference))
    print(json.dumps(result.to_dict()))
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    text = rbs.dump_records_jsonl(rbs.read_rank_csv(_read(args.csv)))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    manifest = RunManifest.load(Path(args.manifest))
    # every input is read and checked before a backend is built or called
    catalog = _catalog(str(manifest.catalog_path) if manifest.catalog_path else None)
    corpus: Corpus = load_corpus_file(manifest.corpus_path, catalog)
    exemplar: PlanDocument = (
        parse_document(_read(manifest.exemplar_path)) if manifest.exemplar_path else default_exemplar()
    )
    loop_cfg = dict(manifest.loop)
    if args.max_iterations is not None:
        loop_cfg["max_iterations"] = args.max_iterations
    if args.acceptance is not None:
        loop_cfg["acceptance"] = args.acceptance
    if manifest.sap_prompt_path:
        loop_cfg["sap_prompt"] = load_template(manifest.sap_prompt_path)
    if manifest.criteria_path:
        loop_cfg["criteria"] = load_template(manifest.criteria_path)
    try:
        config = LoopConfig(**loop_cfg)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid loop config: {exc}") from None
    registry = BenchmarkRegistry(corpus)
    if manifest.benchmarks_path:
        registry.load_promoted(json.loads(_read(manifest.benchmarks_path)))

    gen = backend_from_config(manifest.backends["generator"], manifest.base_dir)
    ev = backend_from_config(manifest.backends["evaluator"], manifest.base_dir)
    out_root = Path(args.out) if args.out else manifest.output_dir
    run_dir = out_root / manifest.run_id
    workers = args.workers if args.workers is not None else manifest.workers

    results = run_corpus(corpus, catalog, exemplar, gen, ev, config, registry, workers)

    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(json.dumps(manifest.raw, indent=2) + "\n", encoding="utf-8")
    effective = {
        role: {"label": b.label, **asdict(b.settings)} for role, b in (("generator", gen), ("evaluator", ev))
    }
    (run_dir / "settings.json").write_text(json.dumps(effective, indent=2) + "\n", encoding="utf-8")
    for res in results:
        sdir = run_dir / res.scenario_id
        sdir.mkdir(exist_ok=True)
        res.transcript.write(sdir / "transcript.jsonl")
        (sdir / "result.json").write_text(json.dumps(res.to_dict(), indent=2) + "\n", encoding="utf-8")
        status = "converged" if res.converged else "not converged"
        print(
            f"{res.scenario_id}: {status} after {res.iterations_used} round(s), "
            f"overall {res.adopted_evaluation.overall:.3f} vs benchmark {res.benchmark_overall:.3f}"
        )
    (run_dir / "benchmarks.json").write_text(json.dumps(registry.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="llmsap", description="Situational-awareness FSM planning toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a plan document")
    s.add_argument("plan")
    s.add_argument("--catalog", help="action manifest (default: bundled)")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("metrics", help="structural metrics of a plan as JSON")
    s.add_argument("plan")
    s.add_argument("--catalog")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("dot", help="Graphviz text for a plan")
    s.add_argument("plan")
    s.set_defaults(func=cmd_dot)

    s = sub.add_parser("run", help="run the refinement loop over a corpus")
    s.add_argument("manifest")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", help="output root (overrides the manifest)")
    s.add_argument("--max-iterations", type=int)
    s.add_argument("--acceptance", choices=["strict", "meet"])
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("rbs", help="rank-based scores from rank tables or score files")
    s.add_argument("files", nargs="*")
    s.add_argument("--by-level", action="store_true")
    s.add_argument("--levels", help="levels CSV or corpus JSONL")
    s.add_argument(
        "--bundled",
        choices=["annotator1", "annotator2", "annotator3", "rounded_average"],
        help="include a bundled human annotation table",
    )
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_rbs)

    s = sub.add_parser("agreement", help="fraction of scenarios with identical rankings")
    s.add_argument("candidate")
    s.add_argument("reference")
    s.set_defaults(func=cmd_agreement)

    s = sub.add_parser("ingest-annotations", help="normalize a rank CSV into JSONL records")
    s.add_argument("csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ingest)
    return p


def _is_backend_failure(exc: BaseException) -> bool:
    while exc is not None:
        if isinstance(exc, (BackendError, ExtractionFailed)):
            return True
        exc = exc.__cause__
    return False


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND if _is_backend_failure(exc) else EXIT_DATA


dispatch = main

if __name__ == "__main__":
    sys.exit(main())
