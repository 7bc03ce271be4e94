"""Problem records and their JSON-lines wire format.

One problem is one puzzle ready for a solver: constraints, blanks, options,
the gold letters (absent for nota problems), and optionally the knowledge
passage. Serialization is lossless and canonical: keys are sorted, unicode
is kept raw, and one problem occupies one line, so equal inputs produce
byte-equal files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .csp import Constraint, blank_number
from .errors import DataError
from .kg import KnowledgeGraph, Triple
from .options import (
    LETTERS,
    OptionAssignment,
    TIERS,
    certify_option_uniqueness,
    letter_for,
)

@dataclass
class Problem:
    id: str
    tier: str
    constraints: tuple[Constraint, ...]
    blanks: tuple[str, ...]
    options: dict[str, tuple[str, ...]]
    gold: dict[str, str] = field(default_factory=dict)  # blank -> letter; {} when nota
    nota: bool = False
    knowledge: tuple[Triple, ...] | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    # -- derived views ----------------------------------------------------

    def gold_entities(self) -> dict[str, str]:
        out = {}
        for blank, letter in self.gold.items():
            out[blank] = self.options[blank][LETTERS.index(letter)]
        return out

    def option_assignment(self) -> OptionAssignment:
        gold_index = {b: LETTERS.index(l) for b, l in self.gold.items()}
        return OptionAssignment(
            options=dict(self.options),
            gold_index=gold_index,
            nota=self.nota,
            tier=self.tier,
        )

    def nodes(self) -> frozenset[str]:
        slots: set[str] = set()
        for c in self.constraints:
            slots.add(c.head)
            slots.add(c.tail)
        return frozenset(slots)

    def knowledge_graph(self) -> KnowledgeGraph | None:
        """The passage viewed as a miniature KG, for passage-grounded solving."""
        if self.knowledge is None:
            return None
        return KnowledgeGraph.from_triples(self.knowledge)

    def gold_fact_graph(self) -> KnowledgeGraph:
        """Just the gold-grounded constraints as a miniature KG.

        The weakest verification source that still proves the gold answer;
        the fallback when neither the full KG nor a passage is at hand.
        """
        if self.nota:
            raise DataError(f"{self.id}: nota problem has no gold facts")
        golds = self.gold_entities()
        triples = []
        for c in self.constraints:
            gc = c.ground(golds)
            if not gc.is_grounded():
                raise DataError(f"{self.id}: gold does not ground {c.as_list()}")
            triples.append(gc.as_triple())
        return KnowledgeGraph.from_triples(triples)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {
            "id": self.id,
            "tier": self.tier,
            "constraints": [c.as_list() for c in self.constraints],
            "blanks": list(self.blanks),
            "options": {b: list(opts) for b, opts in self.options.items()},
            "seed": self.seed,
            "meta": self.meta,
        }
        if not self.nota:
            d["gold"] = dict(self.gold)
        if self.knowledge is not None:
            d["knowledge"] = [t.as_list() for t in self.knowledge]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        try:
            constraints = tuple(Constraint(*c) for c in d["constraints"])
            blanks = tuple(d["blanks"])
            options = {b: tuple(opts) for b, opts in d["options"].items()}
            knowledge = (
                tuple(Triple(*t) for t in d["knowledge"]) if "knowledge" in d else None
            )
            return cls(
                id=d["id"],
                tier=d["tier"],
                constraints=constraints,
                blanks=blanks,
                options=options,
                gold=dict(d.get("gold", {})),
                nota="gold" not in d,
                knowledge=knowledge,
                seed=d.get("seed"),
                meta=dict(d.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed problem record: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def save_problems(path: str, problems: Iterable[Problem]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(p.to_json())
            fh.write("\n")
            count += 1
    return count


def load_problems(path: str) -> list[Problem]:
    out: list[Problem] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(Problem.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
    return out


def iter_problem_files(paths: Iterable[str]) -> Iterator[Problem]:
    for path in paths:
        yield from load_problems(path)


# -- validation -------------------------------------------------------------


def validate_problem(p: Problem, g: KnowledgeGraph | None = None) -> list[str]:
    """Structural checks, plus KG-dependent checks when a graph is supplied.

    Returns a list of human-readable issues; empty means valid.
    """
    issues: list[str] = []
    if p.tier not in TIERS:
        issues.append(f"unknown tier {p.tier!r}")
    blank_set = set(p.blanks)
    if len(blank_set) != len(p.blanks):
        issues.append("duplicate blank ids")
    try:
        numbers = [blank_number(b) for b in p.blanks]
        if numbers != list(range(1, len(numbers) + 1)):
            issues.append("blank ids are not consecutive from blank 1")
    except ValueError as exc:
        issues.append(str(exc))

    mentioned: set[str] = set()
    for c in p.constraints:
        mentioned.update(c.blanks())
    if mentioned - blank_set:
        issues.append(f"constraints mention unknown blanks {sorted(mentioned - blank_set)}")
    for b in blank_set - mentioned:
        issues.append(f"{b} appears in no constraint")

    for b in p.blanks:
        opts = p.options.get(b)
        if not opts:
            issues.append(f"{b} has no options")
            continue
        if len(set(opts)) != len(opts):
            issues.append(f"{b} has duplicate options")
    if set(p.options) != blank_set:
        issues.append("options keys do not match blanks")

    if p.nota:
        if p.gold:
            issues.append("nota problem carries gold letters")
    else:
        if set(p.gold) != blank_set:
            issues.append("gold letters do not cover exactly the blanks")
        for b, letter in p.gold.items():
            opts = p.options.get(b, ())
            if letter not in LETTERS[: len(opts)]:
                issues.append(f"{b}: gold letter {letter!r} outside option range")

    if g is not None and not issues:
        from .csp import enumerate_solutions, is_unique  # local to avoid cycle noise

        if not p.nota:
            golds = p.gold_entities()
            for c in p.constraints:
                gc = c.ground(golds)
                if gc.is_grounded() and gc.as_triple() not in g:
                    issues.append(f"gold assignment violates {c.as_list()}")
            if not is_unique(g, p):
                n = len(enumerate_solutions(g, p, limit=3))
                issues.append(f"KG solution count is {'>=3' if n >= 3 else n}, expected 1")
        if not certify_option_uniqueness(g, p, p.option_assignment()):
            want = "zero" if p.nota else "one"
            issues.append(f"option cross product does not have exactly {want} satisfying row(s)")
        if p.knowledge is not None:
            for t in p.knowledge:
                if t not in g:
                    issues.append(f"knowledge triple {t.as_list()} is not a KG fact")
                    break
    return issues
