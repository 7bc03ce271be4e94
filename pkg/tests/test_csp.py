import random

import pytest

import oracles
from kcross.csp import (
    BACKTRACK,
    Constraint,
    PROPOSE,
    SolveEvent,
    SolveTranscript,
    VERIFY_FAIL,
    VERIFY_PASS,
    blank_id,
    blank_number,
    enumerate_solutions,
    is_blank,
    is_unique,
    staged_solve,
    verify_all_solve,
)
from kcross.kg import KnowledgeGraph, Triple
from conftest import make_crossword


def test_blank_helpers():
    assert is_blank("blank 1")
    assert is_blank("blank 12")
    assert not is_blank("blankly")
    assert not is_blank("Blank 1")
    assert blank_number("blank 7") == 7
    assert blank_id(7) == "blank 7"


def test_constraint_grounding():
    c = Constraint("blank 1", "actedIn", "True Lies")
    assert c.blanks() == ("blank 1",)
    assert c.involves("blank 1")
    assert c.is_definite_for("blank 1", set())
    grounded = c.ground({"blank 1": "Charlton Heston"})
    assert grounded.as_triple() == Triple("Charlton Heston", "actedIn", "True Lies")
    assert grounded.is_grounded()


def test_blank_blank_constraint_not_definite_until_other_side_fills():
    c = Constraint("blank 2", "actedIn", "blank 1")
    assert not c.is_definite_for("blank 2", set())
    assert c.is_definite_for("blank 2", {"blank 1"})


def test_enumerate_crossword_unique(toy_graph, crossword):
    assert enumerate_solutions(toy_graph, crossword) == [
        {"blank 1": "The Human Contract", "blank 2": "Idris Elba"}
    ]
    assert is_unique(toy_graph, crossword)


def test_enumerate_matches_brute_force_on_fixture(toy_graph, crossword):
    expected = oracles.brute_force_solutions(
        [tuple(t) for t in toy_graph.triples],
        [c.as_list() for c in crossword.constraints],
        list(crossword.blanks),
    )
    got = enumerate_solutions(toy_graph, crossword)
    assert sorted(map(sorted, (s.items() for s in got))) == sorted(
        map(sorted, (s.items() for s in expected))
    )


def test_enumerate_ambiguous_and_limit(toy_graph):
    q = make_crossword(
        constraints=(Constraint("Paz Vega", "actedIn", "blank 1"),),
        blanks=("blank 1",),
        options={"blank 1": ("The Human Contract", "The Spirit (film)")},
        gold={"blank 1": "A"},
    )
    sols = enumerate_solutions(toy_graph, q)
    assert len(sols) == 3
    assert not is_unique(toy_graph, q)
    assert len(enumerate_solutions(toy_graph, q, limit=2)) == 2


def test_enumerate_unsatisfiable(toy_graph):
    q = make_crossword(
        constraints=(
            Constraint("Paz Vega", "actedIn", "blank 1"),
            Constraint("blank 1", "actedIn", "Prom Night (2008 film)"),
        ),
        blanks=("blank 1",),
        options={"blank 1": ("The Human Contract", "The Spirit (film)")},
        gold={"blank 1": "A"},
    )
    assert enumerate_solutions(toy_graph, q) == []


def test_enumerate_random_micrographs_match_brute_force():
    # criterion: package solver against the dumb cross-product on small worlds
    rng = random.Random(2024)
    relations = ("r1", "r2", "r3")
    for trial in range(200):
        n_entities = rng.randint(4, 12)
        entities = [f"e{i}" for i in range(n_entities)]
        triples = set()
        for _ in range(rng.randint(4, 30)):
            triples.add(
                (rng.choice(entities), rng.choice(relations), rng.choice(entities))
            )
        triples = sorted(triples)
        g = KnowledgeGraph.from_triples(triples)
        n_blanks = rng.randint(1, 3)
        blanks = tuple(f"blank {i + 1}" for i in range(n_blanks))
        constraints = []
        for _ in range(rng.randint(1, 4)):
            h, r, t = rng.choice(triples)
            # mask a random end (or both) with random blanks
            if rng.random() < 0.5:
                h = rng.choice(blanks)
            if rng.random() < 0.5 or not any(map(is_blank, (h,))):
                t = rng.choice(blanks)
            constraints.append(Constraint(h, r, t))
        used = {b for c in constraints for b in c.blanks()}
        if used != set(blanks):
            continue

        class Q:
            pass

        q = Q()
        q.constraints = tuple(constraints)
        q.blanks = blanks
        got = enumerate_solutions(g, q)
        expected = oracles.brute_force_solutions(
            triples, [c.as_list() for c in constraints], list(blanks)
        )
        assert sorted(map(sorted, (s.items() for s in got))) == sorted(
            map(sorted, (s.items() for s in expected))
        ), f"trial {trial}"


def test_staged_powell_trace(powell_graph, powell_problem):
    tr = staged_solve(powell_graph, powell_problem, powell_problem.option_assignment())
    assert tr.final == {"blank 1": "male", "blank 2": "Joan Blondell"}
    fails = [e.violated for e in tr.events if e.action == VERIFY_FAIL]
    assert fails == [
        Triple("Dick Powell", "hasGender", "female"),
        Triple("Suzanne Pleshette", "isMarriedTo", "Dick Powell"),
    ]
    assert tr.replay() == tr.final


def test_staged_works_from_passage_mini_graph(powell_problem):
    g = powell_problem.knowledge_graph()
    tr = staged_solve(g, powell_problem, powell_problem.option_assignment())
    assert tr.final == {"blank 1": "male", "blank 2": "Joan Blondell"}


def test_staged_backtracks_on_dead_end(toy_graph):
    # Six Wives passes the only stage-1 check but leaves blank 2 unsolvable
    q = make_crossword(
        constraints=(
            Constraint("Paz Vega", "actedIn", "blank 1"),
            Constraint("blank 2", "actedIn", "blank 1"),
        ),
        options={
            "blank 1": ("The Six Wives of Henry Lefay", "The Human Contract"),
            "blank 2": ("Johnathon Schaech", "Idris Elba"),
        },
        gold={"blank 1": "B", "blank 2": "B"},
    )
    tr = staged_solve(toy_graph, q, q.option_assignment())
    assert tr.final == {"blank 1": "The Human Contract", "blank 2": "Idris Elba"}
    actions = [e.action for e in tr.events]
    assert BACKTRACK in actions
    exhausted = [e for e in tr.events if e.action == PROPOSE and e.candidate is None]
    assert exhausted, "dead end should record a candidate-less proposal"


def test_staged_unsatisfiable_is_none(toy_graph, crossword):
    bad = make_crossword(
        options={
            "blank 1": (
                "The Spirit (film)",
                "The Six Wives of Henry Lefay",
                "A Woman of Paris",
            ),
            "blank 2": ("Johnathon Schaech", "Brittany Snow", "Joe Roberts"),
        },
        gold={},
        nota=True,
    )
    tr = staged_solve(toy_graph, bad, bad.option_assignment())
    assert tr.final is None
    assert tr.replay() is None


def test_verify_all_powell_trace(powell_graph, powell_problem):
    tr = verify_all_solve(
        powell_graph, powell_problem, powell_problem.option_assignment()
    )
    assert tr.final == {"blank 1": "male", "blank 2": "Joan Blondell"}
    fails = [e.violated for e in tr.events if e.action == VERIFY_FAIL]
    # lexicographic option order, first violated constraint in listing order
    assert fails == [
        Triple("Suzanne Pleshette", "isMarriedTo", "Dick Powell"),
        Triple("Dick Powell", "hasGender", "female"),
        Triple("James Garner", "isMarriedTo", "Dick Powell"),
        Triple("Suzanne Pleshette", "isMarriedTo", "Dick Powell"),
    ]
    assert [e.action for e in tr.events][-1] == VERIFY_PASS


def test_verify_all_stops_at_first_satisfying_combo(toy_graph, crossword):
    tr = verify_all_solve(toy_graph, crossword, crossword.option_assignment())
    assert tr.final == {"blank 1": "The Human Contract", "blank 2": "Idris Elba"}
    passes = [e for e in tr.events if e.action == VERIFY_PASS]
    assert len(passes) == 1


def test_verify_all_unsatisfiable_checks_every_combo(toy_graph):
    bad = make_crossword(
        options={
            "blank 1": ("The Spirit (film)", "The Six Wives of Henry Lefay"),
            "blank 2": ("Johnathon Schaech", "Brittany Snow"),
        },
        gold={},
        nota=True,
    )
    tr = verify_all_solve(toy_graph, bad, bad.option_assignment())
    assert tr.final is None
    fails = [e for e in tr.events if e.action == VERIFY_FAIL]
    assert len(fails) == 4


def test_solvers_agree_with_option_brute_force(synth_graph, small_problems):
    for p in small_problems:
        expected = oracles.satisfying_option_combos(
            [tuple(t) for t in synth_graph.triples],
            [c.as_list() for c in p.constraints],
            list(p.blanks),
            {b: list(opts) for b, opts in p.options.items()},
        )
        assert len(expected) == 1
        want = {
            b: p.options[b]["ABCDEFGHIJKLMNOPQRSTUVWXYZ".index(letter)]
            for b, letter in zip(p.blanks, expected[0])
        }
        staged = staged_solve(synth_graph, p, p.option_assignment())
        checked = verify_all_solve(synth_graph, p, p.option_assignment())
        assert staged.final == want
        assert checked.final == want


def test_transcript_roundtrip(powell_graph, powell_problem):
    tr = staged_solve(powell_graph, powell_problem, powell_problem.option_assignment())
    back = SolveTranscript.from_dict(tr.to_dict())
    assert back.strategy == tr.strategy
    assert back.final == tr.final
    assert back.events == tr.events


def test_event_roundtrip():
    e = SolveEvent(
        stage=2,
        action=VERIFY_FAIL,
        blank="blank 1",
        candidate="x",
        violated=Triple("a", "r", "b"),
    )
    assert SolveEvent.from_dict(e.to_dict()) == e
