"""Knowledge graph storage: triples, indices, and TSV loading.

A graph is an immutable collection of directed labeled triples
(head, relation, tail). Everything downstream (sampling, solving,
distractor rules) works off the indices built here, so the graph is
indexed eagerly and never mutated after construction.

All index values are sorted tuples. Iteration order therefore never
depends on hash seeds, which keeps seeded sampling reproducible across
processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import EmptyGraphError, GraphParseError

# Relation sets used to trim the YAGO-style dumps this toolkit is usually
# pointed at. Spatial and affiliation-ish relations produce blanks with
# thousands of interchangeable answers, so they are dropped by default.
DEFAULT_REMOVED_RELATIONS = frozenset({
    "isLocatedIn",
    "livesIn",
    "happenedIn",
    "diedIn",
    "wasBornIn",
    "worksAt",
    "playsFor",
    "isAffiliatedTo",
    "isPoliticianOf",
    "isLeaderOf",
    "influences",
    "owns",
    "isKnownFor",
    "dealsWith",
    "imports",
    "exports",
    "created",
    "isInterestedIn",
    "isConnectedTo",
})

# The relations that survive the default filter on the stock dump.
RETAINED_RELATIONS = frozenset({
    "graduatedFrom",
    "hasMusicalRole",
    "hasAcademicAdvisor",
    "hasChild",
    "wroteMusicFor",
    "hasCapital",
    "actedIn",
    "hasOfficialLanguage",
    "hasWonPrize",
    "hasGender",
    "hasCurrency",
    "directed",
    "isCitizenOf",
    "participatedIn",
    "isMarriedTo",
    "hasNeighbor",
    "edited",
})


@dataclass(frozen=True, order=True)
class Triple:
    head: str
    relation: str
    tail: str

    def __iter__(self) -> Iterator[str]:
        yield self.head
        yield self.relation
        yield self.tail

    def as_list(self) -> list[str]:
        return [self.head, self.relation, self.tail]


@dataclass(frozen=True)
class RelationFilter:
    """Decides which relations a loaded triple may use.

    If ``retained`` is non-empty it acts as an allow-list; otherwise any
    relation not in ``removed`` passes.
    """

    removed: frozenset[str] = frozenset()
    retained: frozenset[str] = frozenset()

    def admits(self, relation: str) -> bool:
        if self.retained:
            return relation in self.retained
        return relation not in self.removed

    @classmethod
    def default(cls) -> "RelationFilter":
        return cls(removed=DEFAULT_REMOVED_RELATIONS)

    @classmethod
    def everything(cls) -> "RelationFilter":
        return cls()

    @classmethod
    def from_file(cls, path: str) -> "RelationFilter":
        """Read a filter file: one relation per line, ``-rel`` removes and
        ``+rel`` retains. Blank lines and ``#`` comments are skipped."""
        removed: set[str] = set()
        retained: set[str] = set()
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("-"):
                    removed.add(line[1:].strip())
                elif line.startswith("+"):
                    retained.add(line[1:].strip())
                else:
                    raise GraphParseError(path, line_no, "expected +relation or -relation")
        return cls(removed=frozenset(removed), retained=frozenset(retained))


@dataclass
class LoadStats:
    lines_read: int = 0
    filtered_out: int = 0
    duplicates: int = 0
    kept: int = 0
    entities: int = 0

    def summary(self) -> str:
        return (
            f"read {self.lines_read} lines, filtered {self.filtered_out}, "
            f"deduped {self.duplicates}, kept {self.kept} triples over "
            f"{self.entities} entities"
        )


class KnowledgeGraph:
    """Immutable triple store with the lookup indices the pipeline needs."""

    def __init__(self, triples: Iterable[Triple], stats: LoadStats | None = None):
        unique = sorted(set(triples))
        self.triples: tuple[Triple, ...] = tuple(unique)
        self._triple_set = frozenset(unique)

        by_relation: dict[str, list[Triple]] = {}
        by_head_relation: dict[tuple[str, str], list[str]] = {}
        by_tail_relation: dict[tuple[str, str], list[str]] = {}
        heads_by_relation: dict[str, set[str]] = {}
        tails_by_relation: dict[str, set[str]] = {}
        incident: dict[str, list[Triple]] = {}
        adjacency: dict[str, set[str]] = {}
        degree: dict[str, int] = {}

        for t in unique:
            by_relation.setdefault(t.relation, []).append(t)
            by_head_relation.setdefault((t.head, t.relation), []).append(t.tail)
            by_tail_relation.setdefault((t.tail, t.relation), []).append(t.head)
            heads_by_relation.setdefault(t.relation, set()).add(t.head)
            tails_by_relation.setdefault(t.relation, set()).add(t.tail)
            incident.setdefault(t.head, []).append(t)
            degree[t.head] = degree.get(t.head, 0) + 1
            if t.tail != t.head:
                incident.setdefault(t.tail, []).append(t)
                degree[t.tail] = degree.get(t.tail, 0) + 1
            adjacency.setdefault(t.head, set()).add(t.tail)
            adjacency.setdefault(t.tail, set()).add(t.head)

        self.by_relation: Mapping[str, tuple[Triple, ...]] = {
            r: tuple(ts) for r, ts in by_relation.items()
        }
        self.by_head_relation: Mapping[tuple[str, str], tuple[str, ...]] = {
            k: tuple(sorted(set(v))) for k, v in by_head_relation.items()
        }
        self.by_tail_relation: Mapping[tuple[str, str], tuple[str, ...]] = {
            k: tuple(sorted(set(v))) for k, v in by_tail_relation.items()
        }
        self._heads_by_relation = {r: frozenset(s) for r, s in heads_by_relation.items()}
        self._tails_by_relation = {r: frozenset(s) for r, s in tails_by_relation.items()}
        self._incident = {e: tuple(ts) for e, ts in incident.items()}
        self._adjacency = {e: tuple(sorted(ns)) for e, ns in adjacency.items()}
        self.degree: Mapping[str, int] = degree
        self.entities: tuple[str, ...] = tuple(sorted(degree))
        self.stats = stats or LoadStats(
            lines_read=len(unique), kept=len(unique), entities=len(degree)
        )

    # -- lookups ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triple_set

    def has_triple(self, head: str, relation: str, tail: str) -> bool:
        return Triple(head, relation, tail) in self._triple_set

    def tails_of(self, head: str, relation: str) -> tuple[str, ...]:
        return self.by_head_relation.get((head, relation), ())

    def heads_of(self, tail: str, relation: str) -> tuple[str, ...]:
        return self.by_tail_relation.get((tail, relation), ())

    def heads_with_relation(self, relation: str) -> frozenset[str]:
        """All entities that appear as head of some triple with this relation.

        Returned as a set: these can be huge, and callers either probe
        membership or sort their own unions.
        """
        return self._heads_by_relation.get(relation, frozenset())

    def tails_with_relation(self, relation: str) -> frozenset[str]:
        return self._tails_by_relation.get(relation, frozenset())

    def neighbors(self, entity: str) -> tuple[str, ...]:
        """Entities sharing a triple with ``entity`` in either direction."""
        return self._adjacency.get(entity, ())

    def incident(self, entity: str) -> tuple[Triple, ...]:
        return self._incident.get(entity, ())

    def relations(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_relation))

    def entities_with_degree(self, degrees: Iterable[int]) -> tuple[str, ...]:
        wanted = set(degrees)
        return tuple(e for e in self.entities if self.degree[e] in wanted)

    def induced_triples(self, nodes: Iterable[str]) -> tuple[Triple, ...]:
        """All triples whose both endpoints lie inside ``nodes``, sorted."""
        node_set = set(nodes)
        seen: set[Triple] = set()
        for node in node_set:
            for t in self.incident(node):
                if t.head in node_set and t.tail in node_set:
                    seen.add(t)
        return tuple(sorted(seen))

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, str] | Triple]) -> "KnowledgeGraph":
        """Build a graph from in-memory triples, deduplicating silently."""
        return cls(t if isinstance(t, Triple) else Triple(*t) for t in triples)


def load_graph(path: str, relation_filter: RelationFilter | None = None) -> KnowledgeGraph:
    """Load a tab-separated triple file.

    Each line is ``head<TAB>relation<TAB>tail``. Fields are kept verbatim
    apart from trimming the line terminator; a wrong field count or an empty
    field is a parse error with the offending line number. Duplicate triples
    are counted and collapsed.
    """
    rf = relation_filter or RelationFilter.default()
    stats = LoadStats()
    seen: set[Triple] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            stats.lines_read += 1
            fields = line.split("\t")
            if len(fields) != 3:
                raise GraphParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            head, relation, tail = fields
            if not head or not relation or not tail:
                raise GraphParseError(path, line_no, "empty field")
            if not rf.admits(relation):
                stats.filtered_out += 1
                continue
            t = Triple(head, relation, tail)
            if t in seen:
                stats.duplicates += 1
                continue
            seen.add(t)
    if not seen:
        raise EmptyGraphError(f"{path}: no triples left after filtering")
    stats.kept = len(seen)
    graph = KnowledgeGraph(seen, stats=stats)
    stats.entities = len(graph.entities)
    return graph
