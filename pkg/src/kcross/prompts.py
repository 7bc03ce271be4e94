"""Prompt rendering and answer parsing.

Rendering is a pure function of (problem, config, exemplars) and is the
only place puzzle structures get turned into text, so all solver-visible
wording is pinned down here. Styles:

* zero-shot: instruction, optional knowledge, constraints, options.
* few-shot: exemplar blocks whose answers are the bare gold letters.
* cot / cot-sc: exemplar answers cite the gold-grounded constraints first.
* ltm: exemplar answers narrow the combinations constraint by constraint.
* staged: exemplar answers replay a recorded staged solve.
* verify-all: exemplar answers replay a recorded verify-all solve.

Parsing goes the other way and is deliberately forgiving: the last
"blank <i>: <letter>" occurrence per blank wins, any casing, with stray
letters outside the option range treated as unanswered.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .csp import (
    BACKTRACK,
    FILL,
    PROPOSE,
    VERIFY_FAIL,
    VERIFY_PASS,
    Constraint,
    SolveTranscript,
    blank_number,
    staged_solve,
    verify_all_solve,
)
from .errors import RenderError, SamplingError
from .kg import KnowledgeGraph, Triple
from .options import LETTERS, letter_for
from .problems import Problem

STYLES = ("zero-shot", "few-shot", "cot", "cot-sc", "ltm", "staged", "verify-all")
SETTINGS = ("with", "without", "upperbound")
MIXES = ("mixed", "easy", "medium", "hard")

INSTRUCTION = (
    "Instruction: Pick the correct answer for each blank that satisfies "
    "all the given constraints."
)
NOTA_INSTRUCTION = (
    "Output 'none of the above' if none of the option combinations satisfy "
    "all the constraints."
)
NOTA_TEXT = "none of the above"

# Presentation names for the stock relations; anything else falls back to
# splitting the camelCase identifier.
RELATION_PHRASES = {
    "actedIn": "acted in",
    "directed": "directed",
    "edited": "edited",
    "graduatedFrom": "graduated from",
    "hasAcademicAdvisor": "has academic advisor",
    "hasCapital": "has capital",
    "hasChild": "has child",
    "hasCurrency": "has currency",
    "hasGender": "has gender",
    "hasMusicalRole": "has musical role",
    "hasNeighbor": "has neighbor",
    "hasOfficialLanguage": "has official language",
    "hasWonPrize": "has won prize",
    "isCitizenOf": "is citizen of",
    "isMarriedTo": "is married to",
    "participatedIn": "participated in",
    "wroteMusicFor": "wrote music for",
}

_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def humanize_relation(relation: str) -> str:
    phrase = RELATION_PHRASES.get(relation)
    if phrase is not None:
        return phrase
    return _CAMEL_RE.sub(" ", relation).lower()


def fmt_triple(t: Triple | Constraint) -> str:
    return f"({t.head}, {humanize_relation(t.relation)}, {t.tail})"


@dataclass(frozen=True)
class PromptConfig:
    style: str = "zero-shot"
    setting: str = "without"  # with | without | upperbound
    exemplar_count: int = 5
    mix: str = "mixed"
    nota_instruction: bool = False

    def __post_init__(self):
        if self.style not in STYLES:
            raise RenderError(f"unknown style {self.style!r}")
        if self.setting not in SETTINGS:
            raise RenderError(f"unknown setting {self.setting!r}")
        if self.mix not in MIXES:
            raise RenderError(f"unknown mix {self.mix!r}")
        if self.style != "zero-shot" and self.exemplar_count < 1:
            raise RenderError(f"{self.style} needs at least one exemplar")


@dataclass
class Exemplar:
    """A solved problem used for in-context demonstration.

    Staged and verify-all styles replay ``transcript``; the other styles
    derive their answer text from the problem itself.
    """

    problem: Problem
    transcript: SolveTranscript | None = None


# -- low-level pieces --------------------------------------------------------


def _letters_line(p: Problem) -> str:
    if p.nota or not p.gold:
        return NOTA_TEXT
    return ", ".join(f"{b}: {p.gold[b]}" for b in p.blanks)


def _gold_triples(p: Problem) -> list[Triple]:
    golds = p.gold_entities()
    out = []
    for c in p.constraints:
        gc = c.ground(golds)
        if not gc.is_grounded():
            raise RenderError(f"{p.id}: gold does not ground {c.as_list()}")
        out.append(gc.as_triple())
    return out


def _knowledge_line(p: Problem, cfg: PromptConfig) -> str | None:
    if cfg.setting == "without":
        return None
    if cfg.setting == "upperbound":
        triples = _gold_triples(p)
    else:
        if p.knowledge is None:
            raise RenderError(f"{p.id}: no knowledge passage in a with-knowledge prompt")
        triples = list(p.knowledge)
    return "Knowledge: " + "; ".join(fmt_triple(t) for t in triples) + "."


def _option_line(p: Problem, blank: str) -> str:
    items = ", ".join(
        f"{letter_for(i)}. {entity}" for i, entity in enumerate(p.options[blank])
    )
    return f"{blank}: {items}"


def _question_block(p: Problem, cfg: PromptConfig, body: str | None) -> str:
    """One rendered problem; ``body`` turns it into an exemplar block."""
    instruction = INSTRUCTION
    if cfg.nota_instruction:
        instruction = f"{instruction} {NOTA_INSTRUCTION}"
    lines = [instruction]
    knowledge = _knowledge_line(p, cfg)
    if knowledge is not None:
        lines.append(knowledge)
    if body is None:
        lines.append("Desired format: blank i: Z")
    lines.append(
        "Constraints: " + "; ".join(fmt_triple(c) for c in p.constraints) + "."
    )
    lines.append("Options:")
    for b in p.blanks:
        lines.append(_option_line(p, b))
    if body is None:
        lines.append("Answer:")
    elif "\n" in body:
        lines.append("Answer:")
        lines.append(body)
    else:
        lines.append(f"Answer: {body}")
    return "\n".join(lines)


# -- per-style exemplar bodies -----------------------------------------------


def render_cot_body(p: Problem) -> str:
    if p.nota:
        return NOTA_TEXT
    cited = "; ".join(fmt_triple(t) for t in _gold_triples(p))
    return f"{cited}. Therefore, {_letters_line(p)}"


def render_ltm_body(p: Problem, graph: KnowledgeGraph | None = None) -> str:
    """Narrow the option combinations constraint prefix by constraint prefix.

    Verification uses, in order of preference: the supplied graph, the
    problem's knowledge passage, or just the gold-grounded facts.
    """
    g = graph or p.knowledge_graph()
    if g is None:
        g = p.gold_fact_graph()
    steps: list[str] = []
    involved: list[str] = []
    for i, c in enumerate(p.constraints, start=1):
        for b in c.blanks():
            if b not in involved:
                involved.append(b)
        if not involved:
            continue
        ordered = sorted(involved, key=blank_number)
        prefix = p.constraints[:i]
        combos = _prefix_combos(g, prefix, ordered, p.options)
        if combos:
            maybe = ", or ".join(
                " and ".join(
                    f"{b}: {letter_for(p.options[b].index(v))}"
                    for b, v in zip(ordered, combo)
                )
                for combo in combos
            )
        else:
            maybe = NOTA_TEXT
        prefix_txt = ", ".join(fmt_triple(pc) for pc in prefix)
        word = "Considering" if not steps else "considering"
        steps.append(f"{word} {prefix_txt}, maybe {maybe}")
    if not steps:
        raise RenderError(f"{p.id}: no blank-bearing constraints to reason over")
    return "; ".join(steps) + f". Therefore, {_letters_line(p)}"


def _prefix_combos(
    g: KnowledgeGraph,
    prefix: Sequence[Constraint],
    blanks: Sequence[str],
    options: Mapping[str, Sequence[str]],
) -> list[tuple[str, ...]]:
    out = []
    for combo in itertools.product(*(options[b] for b in blanks)):
        assignment = dict(zip(blanks, combo))
        ok = True
        for c in prefix:
            gc = c.ground(assignment)
            if gc.is_grounded():
                if gc.as_triple() not in g:
                    ok = False
                    break
            else:
                ok = False
                break
        if ok:
            out.append(combo)
    return out


def _candidate_letter(p: Problem, blank: str, entity: str) -> str:
    try:
        return letter_for(p.options[blank].index(entity))
    except ValueError:
        raise RenderError(f"{p.id}: {entity!r} is not an option of {blank}")


def _answer_state(
    p: Problem, order: Sequence[str], assignment: Mapping[str, str]
) -> str:
    if not order:
        return "None"
    return ", ".join(
        f"{b}: {_candidate_letter(p, b, assignment[b])}. {assignment[b]}" for b in order
    )


def _remaining(p: Problem, assignment: Mapping[str, str]) -> list[Constraint]:
    out = []
    for c in p.constraints:
        gc = c.ground(assignment)
        if not gc.is_grounded():
            out.append(gc)
    return out


def _joined(constraints: Iterable[Constraint | Triple]) -> str:
    text = "; ".join(fmt_triple(c) for c in constraints)
    return text if text else "None"


def _cited_constraint(
    p: Problem, blank: str, assignment: Mapping[str, str]
) -> Constraint:
    """What the solve step quotes: the first constraint that pins the blank
    under the current answer, else the first constraint mentioning it."""
    for c in p.constraints:
        if c.is_definite_for(blank, assignment):
            return c.ground(assignment)
    for c in p.constraints:
        if c.involves(blank):
            return c.ground(assignment)
    raise RenderError(f"{p.id}: {blank} appears in no constraint")


def _final_letters(p: Problem, final: Mapping[str, str]) -> str:
    return ", ".join(
        f"{b}: {_candidate_letter(p, b, final[b])}" for b in p.blanks
    )


def render_staged_body(p: Problem, transcript: SolveTranscript) -> str:
    """Replay a staged transcript as stage-by-stage text."""
    lines: list[str] = []
    assignment: dict[str, str] = {}
    order: list[str] = []

    def status_block(stage: int) -> None:
        lines.append(f"Stage {stage} - status:")
        lines.append(f"Current answer: {_answer_state(p, order, assignment)}.")
        lines.append(
            f"Remaining constraints containing blanks: {_joined(_remaining(p, assignment))}."
        )

    events = transcript.events
    i = 0
    while i < len(events):
        ev = events[i]
        if ev.action == PROPOSE and ev.candidate is not None:
            stage = ev.stage
            status_block(stage)
            cited = _cited_constraint(p, ev.blank, assignment)
            letter = _candidate_letter(p, ev.blank, ev.candidate)
            lines.append(f"Stage {stage} - solve:")
            lines.append(
                f"From {fmt_triple(cited)}, candidate for {ev.blank}: {letter}. {ev.candidate}."
            )
            i += 1  # the paired fill
            assignment[ev.blank] = ev.candidate
            order.append(ev.blank)
            newly = [
                c.ground(assignment).as_triple()
                for c in p.constraints
                if c.involves(ev.blank) and c.ground(assignment).is_grounded()
            ]
            lines.append(f"Stage {stage} - status update:")
            lines.append(f"Current answer: {_answer_state(p, order, assignment)}.")
            lines.append(
                f"Filled remaining constraints with current answer: {_joined(newly)}."
            )
            lines.append(
                f"Updated remaining constraints containing blanks: {_joined(_remaining(p, assignment))}."
            )
            lines.append(f"Stage {stage} - verify filled constraints:")
            lines.append("Does any error occur in filled remaining constraints?")
            i += 1
            verdict = events[i]
            if verdict.action == VERIFY_PASS:
                lines.append("No.")
                lines.append("Go to next stage.")
            elif verdict.action == VERIFY_FAIL:
                lines.append(f"{fmt_triple(verdict.violated)} is incorrect.")
                lines.append(f"Redo stage {stage}.")
                del assignment[ev.blank]
                order.pop()
            else:
                raise RenderError(f"unexpected event after fill: {verdict.action}")
            i += 1
        elif ev.action == PROPOSE and ev.candidate is None:
            stage = ev.stage
            status_block(stage)
            cited = _cited_constraint(p, ev.blank, assignment)
            lines.append(f"Stage {stage} - solve:")
            lines.append(
                f"From {fmt_triple(cited)}, candidate for {ev.blank}: "
                "None of the given candidates satisfies the constraint."
            )
            i += 1
            back = events[i]
            if back.action != BACKTRACK:
                raise RenderError(f"expected backtrack, got {back.action}")
            if back.blank is not None:
                lines.append(
                    "There is error in current answer. "
                    f"Go back to previous stage: stage {stage - 1}."
                )
                del assignment[back.blank]
                order.remove(back.blank)
            i += 1
        else:
            raise RenderError(f"unexpected staged event {ev.action} at {i}")

    if transcript.final is not None:
        stage = len(transcript.final) + 1
        status_block(stage)
        lines.append(f"Stage {stage} - solve:")
        lines.append("No more remaining constraints with blank.")
        lines.append(f"Final answer: {_final_letters(p, transcript.final)}")
    else:
        lines.append("No candidate combination satisfies all the constraints.")
        lines.append(f"Final answer: {NOTA_TEXT}")
    return "\n".join(lines)


def render_verify_all_body(p: Problem, transcript: SolveTranscript) -> str:
    """Replay a verify-all transcript as candidate/verification text."""
    lines: list[str] = []
    events = transcript.events
    i = 0
    while i < len(events):
        assignment: dict[str, str] = {}
        while i < len(events) and events[i].action in (PROPOSE, FILL):
            if events[i].action == FILL:
                assignment[events[i].blank] = events[i].candidate
            i += 1
        if not assignment:
            raise RenderError("verify-all transcript without fills")
        answer = ", ".join(
            f"{b}: {_candidate_letter(p, b, assignment[b])}. {assignment[b]}"
            for b in p.blanks
        )
        lines.append(f"Candidate answer: {answer};")
        filled = "; ".join(
            fmt_triple(c.ground(assignment)) for c in p.constraints
        )
        lines.append(f"Filled constraints with candidate answer: {filled};")
        lines.append("Verification: Does error occur in filled constraints with candidate answer?")
        verdict = events[i]
        if verdict.action == VERIFY_PASS:
            lines.append("No.")
        elif verdict.action == VERIFY_FAIL:
            lines.append(f"{fmt_triple(verdict.violated)} is incorrect.")
        else:
            raise RenderError(f"unexpected verify-all event {verdict.action}")
        i += 1
    if transcript.final is not None:
        lines.append(f"Therefore, {_final_letters(p, transcript.final)}.")
    else:
        lines.append(f"Therefore, {NOTA_TEXT}.")
    return "\n".join(lines)


def exemplar_body(ex: Exemplar, cfg: PromptConfig) -> str:
    style = cfg.style
    if style == "few-shot":
        return _letters_line(ex.problem)
    if style in ("cot", "cot-sc"):
        return render_cot_body(ex.problem)
    if style == "ltm":
        return render_ltm_body(ex.problem)
    if style == "staged":
        if ex.transcript is None:
            raise RenderError(f"{ex.problem.id}: staged exemplar without transcript")
        return render_staged_body(ex.problem, ex.transcript)
    if style == "verify-all":
        if ex.transcript is None:
            raise RenderError(f"{ex.problem.id}: verify-all exemplar without transcript")
        return render_verify_all_body(ex.problem, ex.transcript)
    raise RenderError(f"style {style!r} takes no exemplars")


def render_prompt(
    p: Problem, cfg: PromptConfig, exemplars: Sequence[Exemplar] = ()
) -> str:
    """The full prompt: exemplar blocks (if any), then the question block."""
    if cfg.style == "zero-shot" and exemplars:
        raise RenderError("zero-shot prompts take no exemplars")
    if cfg.style != "zero-shot" and not exemplars:
        raise RenderError(f"{cfg.style} prompts need exemplars")
    blocks = [
        _question_block(ex.problem, cfg, body=exemplar_body(ex, cfg))
        for ex in exemplars
    ]
    blocks.append(_question_block(p, cfg, body=None))
    return "\n\n".join(blocks)


# -- exemplar assembly -------------------------------------------------------


def _mix_pattern(mix: str, count: int) -> list[str]:
    if mix == "mixed":
        cycle = ("easy", "medium", "easy", "medium", "hard")
        return [cycle[i % len(cycle)] for i in range(count)]
    return [mix] * count


def assemble_exemplars(
    pool: Sequence[Problem],
    cfg: PromptConfig,
    rng: random.Random,
    graph: KnowledgeGraph | None = None,
    exclude_ids: Iterable[str] = (),
) -> list[Exemplar]:
    """Seeded draw of exemplars honoring the tier mix.

    Transcripts for staged and verify-all exemplars are computed here, each
    verified against ``graph`` when given, else against the exemplar's own
    knowledge passage, else against its gold facts.
    """
    if cfg.style == "zero-shot":
        return []
    excluded = set(exclude_ids)
    wanted = _mix_pattern(cfg.mix, cfg.exemplar_count)
    by_tier: dict[str, list[Problem]] = {}
    for p in sorted(pool, key=lambda p: p.id):
        if p.id in excluded:
            continue
        by_tier.setdefault(p.tier, []).append(p)
    chosen: list[Problem] = []
    for tier in ("easy", "medium", "hard"):
        need = wanted.count(tier)
        if not need:
            continue
        have = by_tier.get(tier, [])
        if len(have) < need:
            raise SamplingError(
                f"exemplar pool has {len(have)} {tier} problems, need {need}"
            )
        picked = rng.sample(have, need)
        chosen.extend(picked)
    # put the draws back into pattern order
    queue = {tier: [p for p in chosen if p.tier == tier] for tier in set(wanted)}
    ordered = [queue[tier].pop(0) for tier in wanted]

    exemplars = []
    for p in ordered:
        transcript = None
        if cfg.style in ("staged", "verify-all"):
            g = graph or p.knowledge_graph() or p.gold_fact_graph()
            solver = staged_solve if cfg.style == "staged" else verify_all_solve
            transcript = solver(g, p, p.option_assignment())
        exemplars.append(Exemplar(problem=p, transcript=transcript))
    return exemplars


# -- answer parsing ----------------------------------------------------------

_ANSWER_RE = re.compile(r"blank\s*(\d+)\s*:\s*([A-Za-z])(?![A-Za-z])", re.IGNORECASE)


@dataclass
class ParsedAnswer:
    """Letters recovered from a model response, validated per blank."""

    letters: dict[str, str] = field(default_factory=dict)
    nota_claimed: bool = False

    def letter(self, blank: str) -> str | None:
        return self.letters.get(blank)


def parse_answer(text: str, p: Problem) -> ParsedAnswer:
    """Scan a free-form response for per-blank letters.

    The last occurrence per blank wins, case does not matter, and letters
    outside the blank's option range count as unanswered. The exact phrase
    "none of the above" (any casing) raises the nota claim.
    """
    raw: dict[str, str] = {}
    for m in _ANSWER_RE.finditer(text):
        blank = f"blank {int(m.group(1))}"
        raw[blank] = m.group(2).upper()
    letters = {}
    for b in p.blanks:
        letter = raw.get(b)
        if letter is None:
            continue
        if letter in LETTERS[: len(p.options[b])]:
            letters[b] = letter
    return ParsedAnswer(letters=letters, nota_claimed=NOTA_TEXT in text.lower())
