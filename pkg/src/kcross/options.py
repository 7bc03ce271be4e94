"""Multiple-choice option sampling and the three distractor rules.

A distractor is graded by which structural tests it passes:

* semantic role: the candidate occurs somewhere in the KG in the same slot
  (head or tail) of the same relation as the blank it replaces.
* proximity: the candidate lies inside the BFS neighborhood the puzzle was
  cut from, before downsampling.
* definite constraint: substituting the candidate into at least one of the
  blank's single-blank constraints yields a true KG triple.

Difficulty tiers require rule subsets: easy needs the first, medium the
first two, hard all three. Tiers state minimum requirements, so a hard
distractor is by construction also a valid medium and easy one.
"""

from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass, field

from .csp import Constraint
from .errors import SamplingError, TierInfeasibleError
from .kg import KnowledgeGraph
from .sampler import Neighborhood, QuestionGraph

TIERS = ("easy", "medium", "hard")
LETTERS = string.ascii_uppercase


def letter_for(index: int) -> str:
    if not 0 <= index < len(LETTERS):
        raise ValueError(f"option index out of range: {index}")
    return LETTERS[index]


@dataclass(frozen=True)
class RuleReport:
    """Which distractor rules one candidate passes for one blank."""

    semantic_role: bool
    proximity: bool
    definite_constraint: bool

    REQUIRED = {
        "easy": ("semantic_role",),
        "medium": ("semantic_role", "proximity"),
        "hard": ("semantic_role", "proximity", "definite_constraint"),
    }

    def passes(self, tier: str) -> bool:
        if tier not in self.REQUIRED:
            raise ValueError(f"unknown tier {tier!r}")
        return all(getattr(self, name) for name in self.REQUIRED[tier])


@dataclass
class OptionAssignment:
    """Display-ready options per blank.

    ``options`` preserves presentation order; ``gold_index`` locates the
    correct entity per blank and is empty when ``nota`` is set (the correct
    option was removed everywhere, so no combination works).
    """

    options: dict[str, tuple[str, ...]]
    gold_index: dict[str, int] = field(default_factory=dict)
    nota: bool = False
    tier: str = "easy"

    def __post_init__(self):
        if not self.nota:
            for blank, idx in self.gold_index.items():
                if not 0 <= idx < len(self.options[blank]):
                    raise SamplingError(f"gold index {idx} out of range for {blank}")
        for blank, opts in self.options.items():
            if len(set(opts)) != len(opts):
                raise SamplingError(f"duplicate option for {blank}")

    def gold_letters(self) -> dict[str, str]:
        return {b: letter_for(i) for b, i in self.gold_index.items()}

    def gold_entities(self) -> dict[str, str]:
        return {b: self.options[b][i] for b, i in self.gold_index.items()}


def definite_constraints(q, blank: str) -> list[Constraint]:
    """The blank's constraints whose opposite slot is a concrete entity."""
    return [c for c in q.constraints if c.involves(blank) and c.is_definite_for(blank)]


def semantic_role_pool(g: KnowledgeGraph, q, blank: str) -> set[str]:
    """Entities playing the blank's slot role for any of its relations."""
    pool: set[str] = set()
    for c in q.constraints:
        if c.head == blank:
            pool.update(g.heads_with_relation(c.relation))
        if c.tail == blank:
            pool.update(g.tails_with_relation(c.relation))
    return pool


def definite_pool(g: KnowledgeGraph, q, blank: str) -> set[str]:
    """Entities that make at least one definite constraint of the blank true."""
    pool: set[str] = set()
    for c in definite_constraints(q, blank):
        if c.head == blank:
            pool.update(g.heads_of(c.tail, c.relation))
        else:
            pool.update(g.tails_of(c.head, c.relation))
    return pool


def rule_check(
    g: KnowledgeGraph,
    q,
    n: Neighborhood,
    blank: str,
    candidate: str,
) -> RuleReport:
    """Grade one candidate against the three rules. Used both while sampling
    and as the compliance oracle over finished datasets."""
    semantic = False
    for c in q.constraints:
        if c.head == blank and candidate in g.heads_with_relation(c.relation):
            semantic = True
            break
        if c.tail == blank and candidate in g.tails_with_relation(c.relation):
            semantic = True
            break
    definite = False
    for c in definite_constraints(q, blank):
        if c.head == blank and g.has_triple(candidate, c.relation, c.tail):
            definite = True
            break
        if c.tail == blank and g.has_triple(c.head, c.relation, candidate):
            definite = True
            break
    return RuleReport(
        semantic_role=semantic,
        proximity=candidate in n.nodes,
        definite_constraint=definite,
    )


def candidate_pool(
    g: KnowledgeGraph,
    q: QuestionGraph,
    n: Neighborhood,
    blank: str,
    tier: str,
) -> list[str]:
    """Sorted distractor candidates meeting the tier's minimum rules,
    excluding every blank's gold entity."""
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}")
    pool = semantic_role_pool(g, q, blank)
    if tier in ("medium", "hard"):
        pool &= n.nodes
    if tier == "hard":
        pool &= definite_pool(g, q, blank)
    pool -= set(q.gold.values())
    return sorted(pool)


def _satisfying_count(
    g: KnowledgeGraph, q, o: OptionAssignment, stop_after: int | None = None
) -> int:
    blanks = list(q.blanks)
    count = 0
    for combo in itertools.product(*(o.options[b] for b in blanks)):
        assignment = dict(zip(blanks, combo))
        ok = True
        for c in q.constraints:
            gc = c.ground(assignment)
            # a full option row grounds every slot, so a residual blank
            # would mean the constraint mentions a foreign blank id
            if not gc.is_grounded() or gc.as_triple() not in g:
                ok = False
                break
        if ok:
            count += 1
            if stop_after is not None and count >= stop_after:
                return count
    return count


def certify_option_uniqueness(g: KnowledgeGraph, q, o: OptionAssignment) -> bool:
    """True when the option cross product has exactly one satisfying row
    (zero for nota problems)."""
    target = 0 if o.nota else 1
    return _satisfying_count(g, q, o, stop_after=target + 1) == target


def sample_options(
    g: KnowledgeGraph,
    q: QuestionGraph,
    n: Neighborhood,
    tier: str,
    rng: random.Random,
    per_blank: int = 3,
    max_redraws: int = 20,
) -> OptionAssignment:
    """Draw per_blank options per blank (gold at a random slot, the rest
    tier-compliant distractors) and certify the cross product has a unique
    satisfying row, redrawing up to max_redraws times."""
    if per_blank < 2:
        raise SamplingError("need at least 2 options per blank")
    pools = {b: candidate_pool(g, q, n, b, tier) for b in q.blanks}
    for b, pool in pools.items():
        if len(pool) < per_blank - 1:
            raise TierInfeasibleError(
                f"{b}: only {len(pool)} {tier}-tier distractor candidates, need {per_blank - 1}"
            )
    for _ in range(max_redraws):
        options: dict[str, tuple[str, ...]] = {}
        gold_index: dict[str, int] = {}
        for b in q.blanks:
            distractors = rng.sample(pools[b], per_blank - 1)
            slot = rng.randrange(per_blank)
            row = distractors[:slot] + [q.gold[b]] + distractors[slot:]
            options[b] = tuple(row)
            gold_index[b] = slot
        o = OptionAssignment(options=options, gold_index=gold_index, tier=tier)
        if certify_option_uniqueness(g, q, o):
            return o
    raise TierInfeasibleError(
        f"no uniquely solvable option draw after {max_redraws} attempts ({tier})"
    )


def make_nota(
    g: KnowledgeGraph,
    q: QuestionGraph,
    o: OptionAssignment,
    n: Neighborhood,
    rng: random.Random,
    max_redraws: int = 20,
) -> OptionAssignment:
    """Swap every blank's gold option for a fresh tier-compliant distractor
    so that no combination satisfies all constraints."""
    if o.nota:
        return o
    pools: dict[str, list[str]] = {}
    for b in q.blanks:
        taken = set(o.options[b])
        pool = [e for e in candidate_pool(g, q, n, b, o.tier) if e not in taken]
        if not pool:
            raise TierInfeasibleError(f"{b}: no replacement distractor for nota variant")
        pools[b] = pool
    for _ in range(max_redraws):
        options = {}
        for b in q.blanks:
            replacement = rng.choice(pools[b])
            row = list(o.options[b])
            row[o.gold_index[b]] = replacement
            options[b] = tuple(row)
        candidate = OptionAssignment(options=options, gold_index={}, nota=True, tier=o.tier)
        if certify_option_uniqueness(g, q, candidate):
            return candidate
    raise TierInfeasibleError(f"no zero-solution option draw after {max_redraws} attempts")
