"""Command line front end.

Subcommands:
  generate   build a problem dataset from a knowledge graph TSV
  stats      size and shape summary of dataset files
  validate   structural (and optionally graph-backed) dataset checks
  render     dump the exact prompts an evaluation would send
  solve      run the deterministic solvers over a dataset
  evaluate   grade a responder (HTTP endpoint, oracle, random, or a
             predictions file) against a dataset

Exit codes: 0 success, 1 usage, 2 bad data or infeasible request,
3 transport failure. Logs go to stderr; results go to stdout or --out.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .client import (
    HTTPResponder,
    OracleResponder,
    RandomResponder,
    ResponderConfig,
)
from .csp import enumerate_solutions, staged_solve, verify_all_solve
from .errors import DataError, KCrossError, TransportError
from .harness import EvalConfig, EvalResult, render_for, run_evaluation, score_predictions
from .kg import KnowledgeGraph, RelationFilter, load_graph
from .options import TIERS
from .pipeline import (
    GeneratorConfig,
    generate_dataset,
    parse_config_file,
    utc_now,
    write_manifest,
)
from .problems import Problem, iter_problem_files, save_problems, validate_problem
from .prompts import MIXES, SETTINGS, STYLES, PromptConfig
from .scoring import format_report, random_baseline

log = logging.getLogger("kcross")


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # raise instead of exiting so main() owns the exit code
    def error(self, message):
        raise UsageError(message)


# -- shared flag groups -------------------------------------------------------


def _add_kg_arguments(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument(
        "--kg",
        metavar="FILE",
        required=required,
        help="knowledge graph TSV: head<TAB>relation<TAB>tail per line",
    )
    p.add_argument(
        "--relation-filter",
        metavar="FILE",
        help="relation list file (+keep / -drop lines) replacing the built-in filter",
    )
    p.add_argument(
        "--no-relation-filter",
        action="store_true",
        help="keep every relation in the TSV",
    )


def _load_kg(args) -> KnowledgeGraph:
    if args.kg is None:
        raise UsageError("this command needs --kg")
    if args.no_relation_filter and args.relation_filter:
        raise UsageError("--relation-filter and --no-relation-filter conflict")
    if args.no_relation_filter:
        flt = RelationFilter.everything()
    elif args.relation_filter:
        flt = RelationFilter.from_file(args.relation_filter)
    else:
        flt = RelationFilter.default()
    g = load_graph(args.kg, flt)
    log.info("loaded %s: %d triples, %d entities", args.kg, len(g), len(g.entities))
    return g


def _add_prompt_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--style", choices=STYLES, default="zero-shot", help="prompting style")
    p.add_argument(
        "--setting",
        choices=SETTINGS,
        default="without",
        help="knowledge shown to the subject: the stored passage, none, or gold facts",
    )
    p.add_argument("--exemplars", type=int, default=5, metavar="N", help="exemplars per prompt")
    p.add_argument("--mix", choices=MIXES, default="mixed", help="exemplar difficulty mix")
    p.add_argument(
        "--nota-instruction",
        action="store_true",
        help="tell the subject that 'none of the above' may be the answer",
    )


def _add_data_argument(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", nargs="+", metavar="DATA", help="problem files (JSON lines)")


def _load_data(args) -> list[Problem]:
    problems = list(iter_problem_files(args.data))
    if not problems:
        raise DataError("no problems in " + ", ".join(args.data))
    limit = getattr(args, "limit", None)
    if limit is not None:
        problems = problems[:limit]
    return problems


def _prompt_config(args, problems: list[Problem]) -> PromptConfig:
    nota_instruction = args.nota_instruction
    if not nota_instruction and any(p.nota for p in problems):
        log.info("dataset contains no-correct-combination problems; enabling the hint line")
        nota_instruction = True
    return PromptConfig(
        style=args.style,
        setting=args.setting,
        exemplar_count=args.exemplars,
        mix=args.mix,
        nota_instruction=nota_instruction,
    )


def _out_dir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


# -- generate -----------------------------------------------------------------


def cmd_generate(args) -> int:
    started = utc_now()
    g = _load_kg(args)

    values = parse_config_file(args.config) if args.config else {}
    if args.seed is not None:
        values["seed"] = args.seed
    if args.count is not None:
        values["count"] = args.count
    if args.tier is not None:
        values["tiers"] = tuple(TIERS) if args.tier == "all" else (args.tier,)
    if args.options_per_blank is not None:
        values["per_blank"] = args.options_per_blank
    if args.nota:
        values["nota"] = True
    if args.no_knowledge:
        values["include_knowledge"] = False
    cfg = GeneratorConfig.from_mapping(values)

    result = generate_dataset(g, cfg, parallel=args.parallel)
    if not result.problems:
        raise DataError("no valid problems came out of the attempt budget")

    out = _out_dir(args)
    if out is None:
        raise UsageError("generate needs --out DIR")
    by_tier = result.by_tier()
    outputs = {}
    counts = {"problems": len(result.problems), "valid_graphs": result.valid_graphs}
    for tier in TIERS:
        if tier not in by_tier:
            continue
        name = f"problems.{tier}.jsonl"
        save_problems(str(out / name), by_tier[tier])
        outputs[tier] = name
        counts[tier] = len(by_tier[tier])
    write_manifest(
        out,
        command="generate",
        config=cfg.to_dict(),
        inputs={"kg": args.kg, "relation_filter": args.relation_filter or (
            "none" if args.no_relation_filter else "default")},
        outputs=outputs,
        counts={**counts, "attempts": result.attempts_used},
        started_at=started,
    )
    tiers_part = ", ".join(f"{t} {len(by_tier[t])}" for t in TIERS if t in by_tier)
    print(
        f"wrote {len(result.problems)} problems ({tiers_part}) to {out} "
        f"[{result.valid_graphs} graphs, {result.attempts_used} attempts, "
        f"{result.elapsed:.1f}s]"
    )
    if result.valid_graphs < cfg.count:
        print(
            f"warning: attempt budget ran out at {result.valid_graphs}/{cfg.count} graphs",
            file=sys.stderr,
        )
    return 0


# -- stats --------------------------------------------------------------------


def _stat_block(problems: list[Problem]) -> dict:
    n = len(problems)
    return {
        "problems": n,
        "avg_nodes": sum(len(p.nodes()) for p in problems) / n,
        "avg_constraints": sum(len(p.constraints) for p in problems) / n,
        "avg_blanks": sum(len(p.blanks) for p in problems) / n,
        "nota": sum(1 for p in problems if p.nota),
    }


def cmd_stats(args) -> int:
    problems = _load_data(args)
    groups: dict[str, list[Problem]] = {}
    for p in problems:
        groups.setdefault(p.tier, []).append(p)
    order = [t for t in TIERS if t in groups] + sorted(set(groups) - set(TIERS))
    blocks = {tier: _stat_block(groups[tier]) for tier in order}
    blocks["all"] = _stat_block(problems)

    if args.baseline_trials:
        for tier in order:
            blocks[tier]["random_baseline"] = random_baseline(
                groups[tier], trials=args.baseline_trials, seed=args.seed
            )
        blocks["all"]["random_baseline"] = random_baseline(
            problems, trials=args.baseline_trials, seed=args.seed
        )

    if args.json:
        print(_json_dump(blocks))
        return 0
    header = f"{'tier':8}{'problems':>10}{'avg nodes':>11}{'avg edges':>11}{'avg blanks':>12}"
    if args.baseline_trials:
        header += f"{'rand PC':>9}{'rand FC':>9}"
    print(header)
    for tier in order + ["all"]:
        b = blocks[tier]
        row = (
            f"{tier:8}{b['problems']:>10}{b['avg_nodes']:>11.2f}"
            f"{b['avg_constraints']:>11.2f}{b['avg_blanks']:>12.2f}"
        )
        if args.baseline_trials:
            row += f"{b['random_baseline']['pc']:>9.1f}{b['random_baseline']['fc']:>9.1f}"
        print(row)
    if blocks["all"]["nota"]:
        print(f"# {blocks['all']['nota']} problems have no correct combination")
    return 0


# -- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    problems = _load_data(args)
    g = _load_kg(args) if args.kg else None
    bad = 0
    for p in problems:
        issues = validate_problem(p, g)
        if issues:
            bad += 1
            for issue in issues:
                print(f"{p.id}: {issue}")
    mode = "graph-backed" if g is not None else "structural"
    print(f"checked {len(problems)} problems ({mode}): {bad} invalid")
    return 2 if bad else 0


# -- render -------------------------------------------------------------------


def cmd_render(args) -> int:
    started = utc_now()
    problems = _load_data(args)
    pcfg = _prompt_config(args, problems)
    ecfg = EvalConfig(prompt=pcfg, seed=args.seed)
    g = _load_kg(args) if args.kg else None
    pool = list(iter_problem_files([args.exemplar_data])) if args.exemplar_data else problems

    lines = []
    for p in problems:
        prompt = render_for(p, ecfg, pool, g)
        lines.append(json.dumps({"problem_id": p.id, "prompt": prompt}, sort_keys=True, ensure_ascii=False))
    out = _out_dir(args)
    if out is None:
        for line in lines:
            print(line)
        return 0
    (out / "prompts.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        out,
        command="render",
        config={
            "style": pcfg.style,
            "setting": pcfg.setting,
            "exemplar_count": pcfg.exemplar_count,
            "mix": pcfg.mix,
            "nota_instruction": pcfg.nota_instruction,
            "seed": args.seed,
        },
        inputs={"data": args.data, "exemplar_data": args.exemplar_data, "kg": args.kg},
        outputs={"prompts": "prompts.jsonl"},
        counts={"prompts": len(lines)},
        started_at=started,
    )
    print(f"wrote {len(lines)} prompts to {out / 'prompts.jsonl'}")
    return 0


# -- solve --------------------------------------------------------------------


def _solver_graph(p: Problem, source: str, g: KnowledgeGraph | None) -> KnowledgeGraph:
    if source == "kg" or (source == "auto" and g is not None):
        if g is None:
            raise UsageError("--source kg needs --kg")
        return g
    if source in ("knowledge", "auto"):
        mini = p.knowledge_graph()
        if mini is not None:
            return mini
        if source == "knowledge":
            raise DataError(f"{p.id} has no knowledge passage to solve against")
    return p.gold_fact_graph()


def cmd_solve(args) -> int:
    started = utc_now()
    problems = _load_data(args)
    g = _load_kg(args) if args.kg else None
    if args.strategy == "enumerate" and g is None:
        raise UsageError("enumerate searches the whole graph; it needs --kg")

    lines = []
    solved = 0
    for p in problems:
        if args.strategy == "enumerate":
            solutions = enumerate_solutions(g, p, limit=args.max_solutions)
            solved += 1 if len(solutions) == 1 else 0
            record = {
                "problem_id": p.id,
                "strategy": "enumerate",
                "solutions": solutions,
                "unique": len(solutions) == 1,
            }
        else:
            source_graph = _solver_graph(p, args.source, g)
            solver = staged_solve if args.strategy == "staged" else verify_all_solve
            transcript = solver(source_graph, p, p.option_assignment())
            solved += 1 if transcript.final is not None else 0
            record = {"problem_id": p.id, **transcript.to_dict()}
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))

    out = _out_dir(args)
    if out is None:
        for line in lines:
            print(line)
        return 0
    (out / "transcripts.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        out,
        command="solve",
        config={"strategy": args.strategy, "source": args.source, "max_solutions": args.max_solutions},
        inputs={"data": args.data, "kg": args.kg},
        outputs={"transcripts": "transcripts.jsonl"},
        counts={"problems": len(problems), "solved": solved},
        started_at=started,
    )
    print(f"solved {solved}/{len(problems)}; transcripts in {out / 'transcripts.jsonl'}")
    return 0


# -- evaluate -----------------------------------------------------------------


def _load_predictions(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                out[record["problem_id"]] = record["response_text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(
                    f"{path}:{line_no}: expected {{problem_id, response_text}}: {exc}"
                ) from exc
    return out


def _parse_rate_limit(text: str | None) -> tuple[int, float] | None:
    if text is None:
        return None
    try:
        count, _, window = text.partition("/")
        return (int(count), float(window))
    except ValueError as exc:
        raise UsageError(f"--rate-limit wants COUNT/SECONDS, got {text!r}") from exc


def _build_responder(args, g: KnowledgeGraph | None):
    style = args.style
    samples = args.samples if args.samples is not None else (5 if style == "cot-sc" else 1)
    temperature = args.temperature if args.temperature is not None else (
        0.7 if style == "cot-sc" else 0.1
    )
    kind = args.responder or ("http" if args.endpoint else "oracle")
    if kind == "http":
        if not args.endpoint or not args.model:
            raise UsageError("an http run needs --endpoint and --model")
        cfg = ResponderConfig(
            endpoint=args.endpoint,
            model=args.model,
            temperature=temperature,
            sample_count=samples,
            max_tokens=args.max_tokens,
            timeout=args.timeout,
            max_attempts=args.retries + 1,
            rate_limit=_parse_rate_limit(args.rate_limit),
        )
        return HTTPResponder(cfg)
    if kind == "oracle":
        return OracleResponder(graph=g, strategy=args.oracle_strategy, sample_count=samples)
    return RandomResponder(seed=args.seed, sample_count=samples)


def _responses_lines(result: EvalResult) -> list[str]:
    lines = []
    for o in result.outcomes:
        record = {
            "problem_id": o.problem.id,
            "response_text": o.completions[0].text if o.completions else "",
            "letters": o.parsed.letters,
            "nota_claimed": o.parsed.nota_claimed,
            "pc": o.result.pc,
            "fc": o.result.fc,
            "unfinished": o.result.unfinished,
        }
        if len(o.completions) > 1:
            record["all_responses"] = [c.text for c in o.completions]
        if o.error:
            record["error"] = o.error
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    return lines


def cmd_evaluate(args) -> int:
    started = utc_now()
    problems = _load_data(args)
    pcfg = _prompt_config(args, problems)
    ecfg = EvalConfig(
        prompt=pcfg,
        seed=args.seed,
        parallel=args.parallel,
        exclude_unfinished=args.exclude_unfinished,
    )
    g = _load_kg(args) if args.kg else None

    if args.predictions:
        responder = None
        result = score_predictions(problems, _load_predictions(args.predictions), ecfg)
    else:
        pool = (
            list(iter_problem_files([args.exemplar_data])) if args.exemplar_data else None
        )
        responder = _build_responder(args, g)
        result = run_evaluation(problems, responder, ecfg, exemplar_pool=pool, graph=g)

    report = result.report()
    if args.baseline_trials:
        report["random_baseline"] = random_baseline(
            problems, trials=args.baseline_trials, seed=args.seed
        )
    if isinstance(responder, HTTPResponder):
        report["transport"] = {
            "requests": responder.stats.requests,
            "retries": responder.stats.retries,
            "failures": responder.stats.failures,
            "rate_limited": responder.stats.rate_limited,
        }
    table = format_report({pcfg.setting: report["aggregate"]})

    out = _out_dir(args)
    if out is not None:
        (out / "report.json").write_text(_json_dump(report) + "\n", encoding="utf-8")
        (out / "report.txt").write_text(table + "\n", encoding="utf-8")
        (out / "responses.jsonl").write_text(
            "\n".join(_responses_lines(result)) + "\n", encoding="utf-8"
        )
        write_manifest(
            out,
            command="evaluate",
            config={
                "style": pcfg.style,
                "setting": pcfg.setting,
                "exemplar_count": pcfg.exemplar_count,
                "mix": pcfg.mix,
                "nota_instruction": pcfg.nota_instruction,
                "seed": args.seed,
                "parallel": args.parallel,
                "exclude_unfinished": args.exclude_unfinished,
                "responder": args.responder or ("http" if args.endpoint else "oracle"),
                "model": args.model,
                "predictions": args.predictions,
            },
            inputs={"data": args.data, "exemplar_data": args.exemplar_data, "kg": args.kg},
            outputs={
                "report": "report.json",
                "table": "report.txt",
                "responses": "responses.jsonl",
            },
            counts={"problems": report["n"], "errors": report["errors"]},
            started_at=started,
        )
    print(table)
    if report["errors"]:
        print(f"# {report['errors']} problems errored out", file=sys.stderr)
        if isinstance(responder, HTTPResponder) and report["errors"] == report["n"]:
            raise TransportError("every request failed")
    return 0


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kcross", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("generate", help="build a dataset from a knowledge graph")
    _add_kg_arguments(p, required=True)
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--count", type=int, metavar="N", help="valid question graphs to build")
    p.add_argument("--tier", choices=TIERS + ("all",), help="distractor difficulty to emit")
    p.add_argument(
        "--options-per-blank", type=int, metavar="K", help="choices per blank (default 3)"
    )
    p.add_argument(
        "--nota",
        action="store_true",
        help="replace every gold option so no combination satisfies the constraints",
    )
    p.add_argument(
        "--no-knowledge",
        action="store_true",
        help="skip composing the supporting-fact passages",
    )
    p.add_argument("--seed", type=int, metavar="N", help="master seed (default 0)")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker threads")
    p.add_argument("--config", metavar="FILE", help="key = value generator settings")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="summarize dataset files")
    _add_data_argument(p)
    p.add_argument("--json", action="store_true", help="machine readable output")
    p.add_argument(
        "--baseline-trials",
        type=int,
        default=0,
        metavar="N",
        help="also Monte Carlo a uniform guesser with N trials per problem",
    )
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", help="check dataset files")
    _add_data_argument(p)
    _add_kg_arguments(p)
    p.add_argument("--limit", type=int, metavar="N", help="only check the first N problems")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="dump prompts as JSON lines")
    _add_data_argument(p)
    _add_kg_arguments(p)
    _add_prompt_arguments(p)
    p.add_argument("--exemplar-data", metavar="FILE", help="draw exemplars from this file")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--limit", type=int, metavar="N", help="only render the first N problems")
    p.add_argument("--out", metavar="DIR", help="write prompts.jsonl here instead of stdout")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("solve", help="run the deterministic solvers")
    _add_data_argument(p)
    _add_kg_arguments(p)
    p.add_argument(
        "--strategy",
        choices=("enumerate", "staged", "verify-all"),
        default="verify-all",
        help="enumerate all graph solutions, or walk the options",
    )
    p.add_argument(
        "--source",
        choices=("auto", "kg", "knowledge", "gold"),
        default="auto",
        help="facts the option solvers verify against",
    )
    p.add_argument(
        "--max-solutions",
        type=int,
        default=10,
        metavar="N",
        help="stop enumerate after N solutions per problem",
    )
    p.add_argument("--limit", type=int, metavar="N", help="only solve the first N problems")
    p.add_argument("--out", metavar="DIR", help="write transcripts.jsonl here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="grade a responder against a dataset")
    _add_data_argument(p)
    _add_kg_arguments(p)
    _add_prompt_arguments(p)
    p.add_argument(
        "--responder",
        choices=("http", "oracle", "random"),
        help="default: http when --endpoint is given, else oracle",
    )
    p.add_argument("--endpoint", metavar="URL", help="chat-completions endpoint")
    p.add_argument("--model", metavar="NAME", help="model name sent to the endpoint")
    p.add_argument(
        "--oracle-strategy",
        choices=("staged", "verify-all"),
        default="verify-all",
        help="how the oracle responder writes its answer",
    )
    p.add_argument(
        "--temperature",
        type=float,
        metavar="T",
        help="sampling temperature (default 0.1; 0.7 for cot-sc)",
    )
    p.add_argument(
        "--samples",
        type=int,
        metavar="N",
        help="responses per problem (default 1; 5 for cot-sc)",
    )
    p.add_argument("--max-tokens", type=int, default=2048, metavar="N")
    p.add_argument("--timeout", type=float, default=60.0, metavar="SECONDS")
    p.add_argument("--retries", type=int, default=3, metavar="N", help="retries per request")
    p.add_argument("--rate-limit", metavar="COUNT/SECONDS", help="client side request cap")
    p.add_argument("--exemplar-data", metavar="FILE", help="draw exemplars from this file")
    p.add_argument(
        "--predictions",
        metavar="FILE",
        help="score stored {problem_id, response_text} lines instead of calling anything",
    )
    p.add_argument(
        "--exclude-unfinished",
        action="store_true",
        help="drop truncated responses from the averages",
    )
    p.add_argument(
        "--baseline-trials",
        type=int,
        default=0,
        metavar="N",
        help="include a uniform-guess Monte Carlo baseline in the report",
    )
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker threads")
    p.add_argument("--limit", type=int, metavar="N", help="only evaluate the first N problems")
    p.add_argument("--out", metavar="DIR", help="write report and responses here")
    p.set_defaults(func=cmd_evaluate)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args.verbose)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 3
    except KCrossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
