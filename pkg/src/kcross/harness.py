"""Evaluation harness: render, respond, parse, score, slice.

Ties the pieces together for a whole dataset. Exemplars are drawn per
problem from a pool (by default the dataset itself, minus the problem under
evaluation) with a seed derived from the problem id, so a rerun asks every
question with the same prompt bytes.
"""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .client import Completion, Responder, self_consistency
from .errors import TransportError
from .kg import KnowledgeGraph
from .pipeline import derive_seed
from .problems import Problem
from .prompts import ParsedAnswer, PromptConfig, assemble_exemplars, parse_answer, render_prompt
from .scoring import (
    ProblemScore,
    aggregate,
    nota_stats,
    option_order_slice,
    pattern_slice,
    score,
)

log = logging.getLogger(__name__)


@dataclass
class EvalConfig:
    prompt: PromptConfig = field(default_factory=PromptConfig)
    seed: int = 0
    parallel: int = 1
    exclude_unfinished: bool = False


@dataclass
class Outcome:
    problem: Problem
    prompt: str
    completions: list[Completion]
    parsed: ParsedAnswer
    result: ProblemScore
    error: str | None = None


@dataclass
class EvalResult:
    outcomes: list[Outcome]
    config: EvalConfig

    @property
    def scores(self) -> dict[str, ProblemScore]:
        return {o.problem.id: o.result for o in self.outcomes}

    @property
    def parses(self) -> dict[str, ParsedAnswer]:
        return {o.problem.id: o.parsed for o in self.outcomes}

    def problems(self) -> list[Problem]:
        return [o.problem for o in self.outcomes]

    def report(self) -> dict:
        problems = self.problems()
        scores = self.scores
        out = {
            "n": len(problems),
            "setting": self.config.prompt.setting,
            "style": self.config.prompt.style,
            "aggregate": aggregate(
                problems, scores, exclude_unfinished=self.config.exclude_unfinished
            ),
            "pattern": pattern_slice(problems, scores),
            "option_order": option_order_slice(problems, scores, self.parses),
            "unfinished": sum(1 for o in self.outcomes if o.result.unfinished),
            "errors": sum(1 for o in self.outcomes if o.error),
        }
        if any(p.nota for p in problems):
            out["nota"] = nota_stats(problems, scores)
        return out


def render_for(
    problem: Problem,
    cfg: EvalConfig,
    pool: Sequence[Problem],
    graph: KnowledgeGraph | None = None,
) -> str:
    """The exact prompt one problem gets under this configuration."""
    rng = random.Random(derive_seed(cfg.seed, "exemplars", problem.id))
    exemplars = assemble_exemplars(
        pool, cfg.prompt, rng, graph=graph, exclude_ids={problem.id}
    )
    return render_prompt(problem, cfg.prompt, exemplars)


def _evaluate_one(
    problem: Problem,
    responder: Responder,
    cfg: EvalConfig,
    pool: Sequence[Problem],
    graph: KnowledgeGraph | None,
) -> Outcome:
    prompt = render_for(problem, cfg, pool, graph)
    try:
        completions = responder.respond(prompt, problem)
    except TransportError as exc:
        log.warning("%s: %s", problem.id, exc)
        parsed = ParsedAnswer()
        return Outcome(
            problem=problem,
            prompt=prompt,
            completions=[],
            parsed=parsed,
            result=score(problem, parsed, unfinished=True),
            error=str(exc),
        )
    parses = [parse_answer(c.text, problem) for c in completions]
    parsed = parses[0] if len(parses) == 1 else self_consistency(parses, problem)
    unfinished = bool(completions) and all(not c.finished for c in completions)
    return Outcome(
        problem=problem,
        prompt=prompt,
        completions=completions,
        parsed=parsed,
        result=score(problem, parsed, unfinished=unfinished),
    )


def run_evaluation(
    problems: Sequence[Problem],
    responder: Responder,
    cfg: EvalConfig,
    exemplar_pool: Sequence[Problem] | None = None,
    graph: KnowledgeGraph | None = None,
) -> EvalResult:
    """Evaluate every problem; outcomes keep dataset order."""
    if cfg.prompt.style == "cot-sc":
        sample_count = getattr(responder, "sample_count", None)
        if sample_count is not None and sample_count < 2:
            raise ValueError("cot-sc needs at least 2 samples per problem")
    pool = list(exemplar_pool) if exemplar_pool is not None else list(problems)

    def one(p: Problem) -> Outcome:
        return _evaluate_one(p, responder, cfg, pool, graph)

    if cfg.parallel <= 1:
        outcomes = [one(p) for p in problems]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as tp:
            outcomes = list(tp.map(one, problems))
    return EvalResult(outcomes=outcomes, config=cfg)


def score_predictions(
    problems: Sequence[Problem],
    responses: Mapping[str, str],
    cfg: EvalConfig,
) -> EvalResult:
    """Score already-collected response texts (problem id -> text).

    Problems without a response stay unanswered and score zero.
    """
    outcomes = []
    for p in problems:
        text = responses.get(p.id)
        if text is None:
            parsed = ParsedAnswer()
            outcomes.append(
                Outcome(
                    problem=p,
                    prompt="",
                    completions=[],
                    parsed=parsed,
                    result=score(p, parsed),
                    error="no response",
                )
            )
            continue
        parsed = parse_answer(text, p)
        outcomes.append(
            Outcome(
                problem=p,
                prompt="",
                completions=[Completion(text=text)],
                parsed=parsed,
                result=score(p, parsed),
            )
        )
    return EvalResult(outcomes=outcomes, config=cfg)
