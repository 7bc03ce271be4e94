"""Question-graph construction: center, neighborhood, downsample, mask.

The pipeline walks one path: pick a medium-degree center entity, expand a
bounded BFS neighborhood around it, peel high-degree nodes until the largest
weakly connected component fits the target size, then mask the densest
nodes of that component as blanks. Randomness always comes from a caller
supplied ``random.Random`` and every draw happens over a sorted sequence,
so equal seeds give equal graphs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .csp import Constraint, blank_id
from .errors import DegenerateGraphError, SamplingError
from .kg import KnowledgeGraph, Triple


def round_half_up(x: float) -> int:
    """Round with .5 going up; the stock pipeline never uses bankers rounding."""
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class SamplerConfig:
    """One concrete draw of the construction knobs.

    graph_size is the node budget for the answer graph, blank_count how many
    of its nodes get masked. reduce_multiplier widens the removal window while
    downsampling; blank_multiplier widens the masking pool. hop_limit and
    layer_cap bound the BFS neighborhood.
    """

    graph_size: int
    blank_count: int
    reduce_multiplier: float = 1.2
    blank_multiplier: float = 1.0
    center_degrees: tuple[int, ...] = (5, 7, 9)
    hop_limit: int = 5
    layer_cap: int = 8

    def __post_init__(self):
        if self.graph_size < 2:
            raise SamplingError(f"graph_size must be >= 2, got {self.graph_size}")
        lo = math.ceil(self.graph_size / 4)
        hi = self.graph_size // 2
        if not lo <= self.blank_count <= hi:
            raise SamplingError(
                f"blank_count {self.blank_count} outside [{lo}, {hi}] for graph_size {self.graph_size}"
            )
        if self.hop_limit < 1 or self.layer_cap < 1:
            raise SamplingError("hop_limit and layer_cap must be positive")


@dataclass(frozen=True)
class Neighborhood:
    """Capped BFS ball around a center, with the triples it induces."""

    center: str
    nodes: frozenset[str]
    triples: tuple[Triple, ...]


@dataclass(frozen=True)
class AnswerGraph:
    """A connected, size-bounded slice of the KG; the puzzle's ground truth.

    ``center`` is provenance only: the downsampler may have removed it.
    """

    center: str
    nodes: frozenset[str]
    triples: tuple[Triple, ...]


@dataclass(frozen=True)
class QuestionGraph:
    """The answer graph with blanked nodes; what a solver gets to see.

    ``gold`` maps each blank id back to the masked entity. ``nodes`` contains
    the surviving entities plus the blank ids.
    """

    constraints: tuple[Constraint, ...]
    blanks: tuple[str, ...]
    gold: Mapping[str, str]
    nodes: frozenset[str]
    center: str
    seed: int | None = None

    def __post_init__(self):
        for b in self.blanks:
            if not any(c.involves(b) for c in self.constraints):
                raise SamplingError(f"{b} appears in no constraint")


def sample_center(g: KnowledgeGraph, cfg: SamplerConfig, rng: random.Random) -> str:
    """Uniform pick among entities whose degree is in cfg.center_degrees."""
    pool = g.entities_with_degree(cfg.center_degrees)
    if not pool:
        raise SamplingError(
            f"no entities with degree in {sorted(set(cfg.center_degrees))}"
        )
    return rng.choice(pool)


def khop_neighborhood(
    g: KnowledgeGraph, center: str, cfg: SamplerConfig, rng: random.Random
) -> Neighborhood:
    """BFS out to cfg.hop_limit hops keeping at most cfg.layer_cap new nodes
    per layer (uniformly sampled when a layer overflows)."""
    if center not in g.degree:
        raise SamplingError(f"center {center!r} not in graph")
    nodes: set[str] = {center}
    frontier: list[str] = [center]
    for _ in range(cfg.hop_limit):
        candidates = sorted(
            {nb for u in frontier for nb in g.neighbors(u)} - nodes
        )
        if not candidates:
            break
        if len(candidates) > cfg.layer_cap:
            candidates = rng.sample(candidates, cfg.layer_cap)
        nodes.update(candidates)
        frontier = candidates
    return Neighborhood(
        center=center, nodes=frozenset(nodes), triples=g.induced_triples(nodes)
    )


def _components(nodes: set[str], triples: Iterable[Triple]) -> list[set[str]]:
    """Weakly connected components of the induced (undirected) graph."""
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for t in triples:
        if t.head in adj and t.tail in adj:
            adj[t.head].add(t.tail)
            adj[t.tail].add(t.head)
    seen: set[str] = set()
    comps: list[set[str]] = []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    return comps


def _largest_component(nodes: set[str], triples: Iterable[Triple]) -> set[str]:
    comps = _components(nodes, triples)
    best_size = max(len(c) for c in comps)
    tied = [c for c in comps if len(c) == best_size]
    return min(tied, key=lambda c: tuple(sorted(c)))


def downsample(
    g: KnowledgeGraph, n: Neighborhood, cfg: SamplerConfig, rng: random.Random
) -> AnswerGraph:
    """Shrink the neighborhood until its largest component fits graph_size.

    Each round ranks the remaining nodes by full-KG degree (descending,
    entity id breaking ties) and removes one node drawn uniformly from the
    window [floor((rr-1)/2), rr-1] of that ranking, where
    rr = max(1, round(reduce_multiplier * excess)). Removing from the top
    half of the window keeps hub nodes from dominating the final graph while
    leaving some randomness in what survives. The window is clamped to the
    valid index range. Returns the surviving largest component.
    """
    nodes = set(n.nodes)
    triples = list(n.triples)
    while True:
        largest = _largest_component(nodes, triples)
        if len(largest) < 2:
            raise DegenerateGraphError(
                f"component around {n.center!r} collapsed to {len(largest)} node(s)"
            )
        if len(largest) <= cfg.graph_size:
            kept = g.induced_triples(largest)
            return AnswerGraph(center=n.center, nodes=frozenset(largest), triples=kept)
        ranked = sorted(nodes, key=lambda e: (-g.degree.get(e, 0), e))
        rr = max(1, round_half_up(cfg.reduce_multiplier * (len(nodes) - cfg.graph_size)))
        lo = (rr - 1) // 2
        hi = rr - 1
        hi = min(hi, len(ranked) - 1)
        lo = min(lo, hi)
        victim = ranked[rng.randint(lo, hi)]
        nodes.remove(victim)
        triples = [t for t in triples if t.head != victim and t.tail != victim]


def _graph_degree(a: AnswerGraph) -> dict[str, int]:
    """Incidence counts inside the answer graph (one per unique triple)."""
    deg = {node: 0 for node in a.nodes}
    for t in a.triples:
        deg[t.head] += 1
        if t.tail != t.head:
            deg[t.tail] += 1
    return deg


def select_blanks(
    a: AnswerGraph, cfg: SamplerConfig, rng: random.Random, seed: int | None = None
) -> QuestionGraph:
    """Mask blank_count nodes of the answer graph, preferring dense ones.

    The masking pool is the top max(blank_count, round(blank_count *
    blank_multiplier)) nodes by in-graph degree; the blanks are a uniform
    draw from that pool, numbered in pool order (densest masked node becomes
    blank 1).
    """
    if len(a.nodes) < cfg.blank_count:
        raise SamplingError(
            f"answer graph has {len(a.nodes)} nodes, cannot mask {cfg.blank_count}"
        )
    deg = _graph_degree(a)
    ranked = sorted(a.nodes, key=lambda e: (-deg[e], e))
    pool_size = max(cfg.blank_count, round_half_up(cfg.blank_count * cfg.blank_multiplier))
    pool = ranked[: min(pool_size, len(ranked))]
    chosen = rng.sample(pool, cfg.blank_count)
    chosen.sort(key=pool.index)
    mask = {entity: blank_id(i) for i, entity in enumerate(chosen, start=1)}

    constraints = tuple(
        Constraint(mask.get(t.head, t.head), t.relation, mask.get(t.tail, t.tail))
        for t in a.triples
    )
    gold = {mask[e]: e for e in chosen}
    nodes = frozenset(mask.get(e, e) for e in a.nodes)
    return QuestionGraph(
        constraints=constraints,
        blanks=tuple(blank_id(i) for i in range(1, cfg.blank_count + 1)),
        gold=gold,
        nodes=nodes,
        center=a.center,
        seed=seed,
    )
