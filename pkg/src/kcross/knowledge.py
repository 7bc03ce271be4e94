"""Knowledge passage composition: useful facts drowned in plausible noise.

For every constraint the passage carries the gold-grounded triple plus
``noise_per_useful`` true KG triples that look like they could matter.
Noise is built from distractor-style candidates for the constraint's blank,
preferring candidates that pass all three rules, then semantic role plus
proximity, then semantic role alone. A candidate contributes the constraint
itself when substituting it happens to be true; otherwise a true triple in
which the candidate plays the blank's role with the same relation.

The finished passage is one seeded shuffle of everything. Triples that
appear under several constraints stay duplicated on purpose: the reader is
supposed to see the same fact as often as the graph implies it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .csp import Constraint, is_blank
from .errors import SamplingError
from .kg import KnowledgeGraph, Triple
from .options import candidate_pool
from .sampler import Neighborhood, QuestionGraph


@dataclass(frozen=True)
class KnowledgePassage:
    """Ordered passage triples plus bookkeeping for the 1:n mix.

    ``short`` flags constraints for which the noise pools ran dry; the
    passage then carries fewer noise triples than requested.
    """

    triples: tuple[Triple, ...]
    useful_count: int
    noise_count: int
    short: bool = False


def _grounded_constraint(c: Constraint, gold) -> Triple:
    filled = c.ground(gold)
    if not filled.is_grounded():
        raise SamplingError(f"constraint {c} not fully grounded by gold assignment")
    return filled.as_triple()


def _noise_slot(c: Constraint) -> str:
    """The slot whose occupant gets swapped when fabricating noise.

    Prefer the head blank, then the tail blank; constraints between two
    known entities vary their head.
    """
    if is_blank(c.head):
        return "head"
    if is_blank(c.tail):
        return "tail"
    return "head"


def _noise_for_constraint(
    g: KnowledgeGraph,
    q: QuestionGraph,
    n: Neighborhood,
    c: Constraint,
    want: int,
    rng: random.Random,
) -> list[Triple]:
    gold_triple = _grounded_constraint(c, q.gold)
    slot = _noise_slot(c)
    varied = c.head if slot == "head" else c.tail
    other = c.tail if slot == "head" else c.head
    other_entity = q.gold.get(other, other)

    if is_blank(varied):
        ordered: list[str] = []
        seen: set[str] = set()
        for tier in ("hard", "medium", "easy"):
            pool = [e for e in candidate_pool(g, q, n, varied, tier) if e not in seen]
            rng.shuffle(pool)
            ordered.extend(pool)
            seen.update(pool)
    else:
        # known-known constraint: any same-relation, same-role entity works
        role = (
            g.heads_with_relation(c.relation)
            if slot == "head"
            else g.tails_with_relation(c.relation)
        )
        ordered = sorted(role - {varied})
        rng.shuffle(ordered)

    picked: list[Triple] = []
    chosen_triples = {gold_triple}
    for candidate in ordered:
        if len(picked) >= want:
            break
        if slot == "head":
            direct = Triple(candidate, c.relation, other_entity)
            completions = g.tails_of(candidate, c.relation)
            fallback = (
                Triple(candidate, c.relation, rng.choice(completions))
                if completions
                else None
            )
        else:
            direct = Triple(other_entity, c.relation, candidate)
            completions = g.heads_of(candidate, c.relation)
            fallback = (
                Triple(rng.choice(completions), c.relation, candidate)
                if completions
                else None
            )
        triple = direct if direct in g else fallback
        if triple is None or triple in chosen_triples:
            continue
        chosen_triples.add(triple)
        picked.append(triple)
    return picked


def compose_knowledge(
    g: KnowledgeGraph,
    q: QuestionGraph,
    n: Neighborhood,
    rng: random.Random,
    noise_per_useful: int = 3,
) -> KnowledgePassage:
    """Build the passage for a puzzle whose gold assignment is known."""
    useful: list[Triple] = []
    noise: list[Triple] = []
    short = False
    for c in q.constraints:
        useful.append(_grounded_constraint(c, q.gold))
        batch = _noise_for_constraint(g, q, n, c, noise_per_useful, rng)
        if len(batch) < noise_per_useful:
            short = True
        noise.extend(batch)
    combined = useful + noise
    rng.shuffle(combined)
    return KnowledgePassage(
        triples=tuple(combined),
        useful_count=len(useful),
        noise_count=len(noise),
        short=short,
    )
