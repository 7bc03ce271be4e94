import random
from pathlib import Path

import pytest

import synth
from kcross.csp import Constraint
from kcross.kg import Triple, load_graph
from kcross.pipeline import GeneratorConfig, generate_dataset
from kcross.problems import Problem

DATA = Path(__file__).parent / "data"


def pytest_configure(config):
    # filled by tests/test_acceptance.py, one entry per release criterion
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


def read_passage(name: str) -> tuple[Triple, ...]:
    """The raw fixture lines as triples, duplicates and order preserved."""
    out = []
    for line in (DATA / name).read_text(encoding="utf-8").splitlines():
        head, relation, tail = line.split("\t")
        out.append(Triple(head, relation, tail))
    return tuple(out)


@pytest.fixture(scope="session")
def toy_graph():
    return load_graph(str(DATA / "toy.tsv"))


@pytest.fixture(scope="session")
def powell_graph():
    return load_graph(str(DATA / "powell.tsv"))


@pytest.fixture(scope="session")
def truelies_graph():
    return load_graph(str(DATA / "truelies.tsv"))


def make_crossword(**overrides) -> Problem:
    base = dict(
        id="kc-fixture-crossword",
        tier="easy",
        constraints=(
            Constraint("Paz Vega", "actedIn", "blank 1"),
            Constraint("Jada Pinkett Smith", "directed", "blank 1"),
            Constraint("blank 2", "actedIn", "Prom Night (2008 film)"),
            Constraint("blank 2", "actedIn", "blank 1"),
        ),
        blanks=("blank 1", "blank 2"),
        options={
            "blank 1": (
                "The Human Contract",
                "The Spirit (film)",
                "The Six Wives of Henry Lefay",
            ),
            "blank 2": ("Johnathon Schaech", "Idris Elba", "Brittany Snow"),
        },
        gold={"blank 1": "A", "blank 2": "B"},
        knowledge=read_passage("toy.tsv"),
        seed=0,
    )
    base.update(overrides)
    return Problem(**base)


@pytest.fixture
def crossword() -> Problem:
    return make_crossword()


@pytest.fixture
def powell_problem() -> Problem:
    return Problem(
        id="kc-fixture-powell",
        tier="medium",
        constraints=(
            Constraint("blank 2", "isMarriedTo", "Dick Powell"),
            Constraint("blank 2", "actedIn", "Support Your Local Gunfighter"),
            Constraint("Dick Powell", "isMarriedTo", "blank 2"),
            Constraint("Dick Powell", "hasGender", "blank 1"),
            Constraint("Borislav Mikhailov", "hasGender", "blank 1"),
            Constraint("Cole Tinkler", "hasGender", "blank 1"),
        ),
        blanks=("blank 1", "blank 2"),
        options={
            "blank 1": ("female", "male"),
            "blank 2": ("Suzanne Pleshette", "Joan Blondell", "James Garner"),
        },
        gold={"blank 1": "B", "blank 2": "B"},
        knowledge=read_passage("powell.tsv"),
        seed=0,
    )


@pytest.fixture
def truelies_problem() -> Problem:
    return Problem(
        id="kc-fixture-truelies",
        tier="hard",
        constraints=(
            Constraint("blank 1", "actedIn", "True Lies"),
            Constraint("blank 1", "actedIn", "Chiefs (miniseries)"),
        ),
        blanks=("blank 1",),
        options={"blank 1": ("Bill Paxton", "Charlton Heston", "Paul Sorvino")},
        gold={"blank 1": "B"},
        knowledge=read_passage("truelies.tsv"),
        seed=0,
    )


@pytest.fixture(scope="session")
def synth_graph():
    return synth.build_graph()


@pytest.fixture(scope="session")
def small_result(synth_graph):
    """A modest all-tier batch most module tests share."""
    return generate_dataset(synth_graph, GeneratorConfig(seed=7, count=30))


@pytest.fixture(scope="session")
def small_problems(small_result):
    return small_result.problems


@pytest.fixture(scope="session")
def nota_result(synth_graph):
    return generate_dataset(
        synth_graph,
        GeneratorConfig(seed=11, count=15, nota=True, attempt_factor=300),
    )


@pytest.fixture
def rng():
    return random.Random(123)
