"""Constraint model and oracle solvers.

A puzzle is a set of triple constraints whose slots are either concrete
entities or blank placeholders ("blank 1", "blank 2", ...). Three solvers
live here:

* ``enumerate_solutions``: backtracking over the whole KG, used to certify
  that a puzzle has exactly one answer combination.
* ``staged_solve``: fills one blank per stage from its multiple-choice
  options, verifying the constraints that become fully grounded and
  backtracking on dead ends.
* ``verify_all_solve``: tries full option combinations in lexicographic
  order and verifies each one outright.

The staged and verify-all solvers record every step in a ``SolveTranscript``
so the same search can be replayed or rendered as text later.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .kg import KnowledgeGraph, Triple

_BLANK_RE = re.compile(r"^blank (\d+)$")

Assignment = dict[str, str]


def is_blank(slot: str) -> bool:
    return _BLANK_RE.match(slot) is not None


def blank_number(blank: str) -> int:
    m = _BLANK_RE.match(blank)
    if m is None:
        raise ValueError(f"not a blank id: {blank!r}")
    return int(m.group(1))


def blank_id(number: int) -> str:
    return f"blank {number}"


@dataclass(frozen=True, order=True)
class Constraint:
    """One triple constraint; head or tail (or both) may be a blank."""

    head: str
    relation: str
    tail: str

    def blanks(self) -> tuple[str, ...]:
        out = []
        if is_blank(self.head):
            out.append(self.head)
        if is_blank(self.tail) and self.tail != self.head:
            out.append(self.tail)
        return tuple(out)

    def involves(self, blank: str) -> bool:
        return self.head == blank or self.tail == blank

    def other_slot(self, blank: str) -> str | None:
        """The slot opposite ``blank``, or None for a self-loop on it."""
        if self.head == blank and self.tail == blank:
            return None
        if self.head == blank:
            return self.tail
        if self.tail == blank:
            return self.head
        raise ValueError(f"{blank!r} not in constraint {self}")

    def is_definite_for(self, blank: str, assigned: Mapping[str, str] | None = None) -> bool:
        """True if the slot opposite ``blank`` is an entity or an already
        assigned blank, so the constraint pins candidates for ``blank``."""
        if not self.involves(blank):
            return False
        other = self.other_slot(blank)
        if other is None:
            return False
        if not is_blank(other):
            return True
        return assigned is not None and other in assigned

    def ground(self, assignment: Mapping[str, str]) -> "Constraint":
        """Substitute assigned blanks; unassigned blanks stay symbolic."""
        head = assignment.get(self.head, self.head) if is_blank(self.head) else self.head
        tail = assignment.get(self.tail, self.tail) if is_blank(self.tail) else self.tail
        return Constraint(head, self.relation, tail)

    def is_grounded(self) -> bool:
        return not is_blank(self.head) and not is_blank(self.tail)

    def as_triple(self) -> Triple:
        if not self.is_grounded():
            raise ValueError(f"constraint still has blanks: {self}")
        return Triple(self.head, self.relation, self.tail)

    def as_list(self) -> list[str]:
        return [self.head, self.relation, self.tail]


# -- transcripts ----------------------------------------------------------

PROPOSE = "propose"
FILL = "fill"
VERIFY_PASS = "verify-pass"
VERIFY_FAIL = "verify-fail"
BACKTRACK = "backtrack"


@dataclass(frozen=True)
class SolveEvent:
    """One step of a recorded solve.

    ``stage`` is the search depth for the staged solver and the combination
    index for verify-all. A propose with ``candidate=None`` means the stage
    ran out of options. ``violated`` is the grounded form of the first
    constraint a verification step found to be false.
    """

    stage: int
    action: str
    blank: str | None = None
    candidate: str | None = None
    violated: Triple | None = None

    def to_dict(self) -> dict:
        out: dict = {"stage": self.stage, "action": self.action}
        if self.blank is not None:
            out["blank"] = self.blank
        if self.candidate is not None:
            out["candidate"] = self.candidate
        if self.violated is not None:
            out["violated"] = self.violated.as_list()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SolveEvent":
        violated = d.get("violated")
        return cls(
            stage=d["stage"],
            action=d["action"],
            blank=d.get("blank"),
            candidate=d.get("candidate"),
            violated=Triple(*violated) if violated else None,
        )


@dataclass
class SolveTranscript:
    """Ordered solve events plus the final assignment (None = unsatisfiable)."""

    strategy: str
    events: list[SolveEvent] = field(default_factory=list)
    final: Assignment | None = None

    def replay(self) -> Assignment | None:
        """Re-derive the final assignment from the events alone.

        fill adds a binding; a verify-fail retracts its own blank (or, for
        combination-level failures carrying no blank, everything); backtrack
        retracts the named blank of the stage being returned to. A transcript
        counts as solved only when it ends on a verify-pass.
        """
        current: Assignment = {}
        for ev in self.events:
            if ev.action == FILL:
                current[ev.blank] = ev.candidate
            elif ev.action == VERIFY_FAIL:
                if ev.blank is not None:
                    current.pop(ev.blank, None)
                else:
                    current.clear()
            elif ev.action == BACKTRACK and ev.blank is not None:
                current.pop(ev.blank, None)
        if not self.events or self.events[-1].action != VERIFY_PASS:
            return None
        return current

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "events": [e.to_dict() for e in self.events],
            "final": None if self.final is None else dict(sorted(self.final.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveTranscript":
        return cls(
            strategy=d["strategy"],
            events=[SolveEvent.from_dict(e) for e in d.get("events", [])],
            final=d.get("final"),
        )


# -- KG-wide enumeration ---------------------------------------------------


def _check_known_constraints(g: KnowledgeGraph, constraints: Sequence[Constraint]) -> bool:
    """Constraints without blanks must already be true facts."""
    for c in constraints:
        if not c.blanks() and c.as_triple() not in g:
            return False
    return True


def _candidates(
    g: KnowledgeGraph,
    constraints: Sequence[Constraint],
    blank: str,
    assignment: Mapping[str, str],
) -> list[str]:
    """Candidate entities for a blank under the current partial assignment.

    Intersects index lookups over every constraint whose opposite slot is
    known. A blank tied only to other unassigned blanks falls back to the
    union of role-compatible entities for its relations.
    """
    pools: list[set[str]] = []
    for c in constraints:
        if not c.involves(blank):
            continue
        gc = c.ground(assignment)
        if gc.head == blank and not is_blank(gc.tail):
            pools.append(set(g.heads_of(gc.tail, gc.relation)))
        elif gc.tail == blank and not is_blank(gc.head):
            pools.append(set(g.tails_of(gc.head, gc.relation)))
    if pools:
        out = pools[0]
        for p in pools[1:]:
            out &= p
        return sorted(out)
    role: set[str] = set()
    for c in constraints:
        if c.head == blank:
            role.update(g.heads_with_relation(c.relation))
        if c.tail == blank:
            role.update(g.tails_with_relation(c.relation))
    return sorted(role)


def enumerate_solutions(
    g: KnowledgeGraph,
    q,
    limit: int | None = None,
) -> list[Assignment]:
    """All blank assignments (entities from ``g``) satisfying every constraint.

    ``q`` needs ``constraints`` and ``blanks`` attributes. Search picks the
    unassigned blank with the fewest candidates first and tries candidates in
    entity-id order, so the result order is deterministic. ``limit`` stops
    the search early once that many solutions are found.
    """
    constraints = list(q.constraints)
    blanks = list(q.blanks)
    if not _check_known_constraints(g, constraints):
        return []
    if not blanks:
        return [dict()]

    solutions: list[Assignment] = []
    assignment: Assignment = {}

    def consistent(blank: str) -> bool:
        for c in constraints:
            if not c.involves(blank):
                continue
            gc = c.ground(assignment)
            if gc.is_grounded() and gc.as_triple() not in g:
                return False
        return True

    def dfs() -> bool:
        if len(assignment) == len(blanks):
            solutions.append(dict(assignment))
            return limit is not None and len(solutions) >= limit
        pending = [b for b in blanks if b not in assignment]
        scored = [(_candidates(g, constraints, b, assignment), b) for b in pending]
        cands, blank = min(scored, key=lambda cb: (len(cb[0]), blank_number(cb[1])))
        for value in cands:
            assignment[blank] = value
            if consistent(blank) and dfs():
                return True
            del assignment[blank]
        return False

    dfs()
    return solutions


def is_unique(g: KnowledgeGraph, q) -> bool:
    """True if the puzzle has exactly one satisfying assignment over ``g``."""
    return len(enumerate_solutions(g, q, limit=2)) == 1


# -- option-space solvers --------------------------------------------------


def _first_violation(
    g: KnowledgeGraph,
    constraints: Sequence[Constraint],
    assignment: Mapping[str, str],
    touching: str | None = None,
) -> Triple | None:
    """First constraint (in listed order) that grounds fully and is false.

    With ``touching`` set, only constraints involving that blank are checked;
    that is the staged solver's "newly grounded" rule.
    """
    for c in constraints:
        if touching is not None and not c.involves(touching):
            continue
        gc = c.ground(assignment)
        if gc.is_grounded():
            t = gc.as_triple()
            if t not in g:
                return t
    return None


def staged_solve(g: KnowledgeGraph, q, options) -> SolveTranscript:
    """Depth-first multiple-choice solve, one blank per stage.

    Stage order: the unsolved blank with the most definite constraints under
    the current assignment (ties toward the lower blank number). Options are
    tried in listed order. A failed verification retracts the candidate; an
    exhausted stage emits a no-candidate propose and backtracks into the
    previous stage. Unsatisfiable option spaces yield ``final=None``.
    """
    constraints = list(q.constraints)
    blanks = list(q.blanks)
    tr = SolveTranscript(strategy="staged")
    if not _check_known_constraints(g, constraints):
        return tr

    assignment: Assignment = {}
    stack: list[dict] = []

    def choose_blank() -> str:
        pending = [b for b in blanks if b not in assignment]
        counts = {
            b: sum(1 for c in constraints if c.is_definite_for(b, assignment))
            for b in pending
        }
        return min(pending, key=lambda b: (-counts[b], blank_number(b)))

    while True:
        if len(assignment) == len(blanks):
            tr.final = dict(assignment)
            return tr
        stack.append({"blank": choose_blank(), "next": 0})
        advanced = False
        while stack and not advanced:
            rec = stack[-1]
            stage = len(stack)
            blank = rec["blank"]
            opts = options.options[blank]
            if rec["next"] >= len(opts):
                tr.events.append(SolveEvent(stage, PROPOSE, blank=blank, candidate=None))
                stack.pop()
                if not stack:
                    tr.events.append(SolveEvent(stage, BACKTRACK))
                    return tr
                prev = stack[-1]
                prev_blank = prev["blank"]
                prev_value = assignment.pop(prev_blank)
                tr.events.append(
                    SolveEvent(stage, BACKTRACK, blank=prev_blank, candidate=prev_value)
                )
                continue
            value = opts[rec["next"]]
            rec["next"] += 1
            tr.events.append(SolveEvent(stage, PROPOSE, blank=blank, candidate=value))
            assignment[blank] = value
            tr.events.append(SolveEvent(stage, FILL, blank=blank, candidate=value))
            violated = _first_violation(g, constraints, assignment, touching=blank)
            if violated is None:
                tr.events.append(SolveEvent(stage, VERIFY_PASS, blank=blank, candidate=value))
                advanced = True
            else:
                tr.events.append(
                    SolveEvent(stage, VERIFY_FAIL, blank=blank, candidate=value, violated=violated)
                )
                del assignment[blank]


def verify_all_solve(g: KnowledgeGraph, q, options) -> SolveTranscript:
    """Try every full option combination in lexicographic option order.

    Each failing combination contributes a single verify-fail naming the
    first violated constraint in listed order; the first clean combination
    becomes the final answer. ``final=None`` when nothing satisfies.
    """
    constraints = list(q.constraints)
    blanks = list(q.blanks)
    tr = SolveTranscript(strategy="verify-all")
    option_lists = [options.options[b] for b in blanks]
    for stage, combo in enumerate(itertools.product(*option_lists), start=1):
        assignment = dict(zip(blanks, combo))
        for b in blanks:
            tr.events.append(SolveEvent(stage, PROPOSE, blank=b, candidate=assignment[b]))
            tr.events.append(SolveEvent(stage, FILL, blank=b, candidate=assignment[b]))
        violated = _first_violation(g, constraints, assignment)
        if violated is None:
            tr.events.append(SolveEvent(stage, VERIFY_PASS))
            tr.final = assignment
            return tr
        tr.events.append(SolveEvent(stage, VERIFY_FAIL, violated=violated))
    return tr
