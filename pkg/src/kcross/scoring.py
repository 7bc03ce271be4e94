"""Scoring and result slicing.

Two metrics run through everything: per-blank accuracy (fraction of blanks
answered correctly) and full accuracy (1 only when every blank is right).
On nota problems any letter answer scores zero; claiming "none of the
above" scores full marks. Unanswered blanks are wrong, and problems whose
responses were cut off can be excluded from aggregates via a switch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .options import LETTERS
from .problems import Problem
from .prompts import ParsedAnswer


@dataclass
class ProblemScore:
    pc: float
    fc: int
    unfinished: bool = False
    nota_claimed: bool = False


def score(p: Problem, parsed: ParsedAnswer, unfinished: bool = False) -> ProblemScore:
    if p.nota:
        hit = 1.0 if parsed.nota_claimed else 0.0
        return ProblemScore(
            pc=hit, fc=int(hit), unfinished=unfinished, nota_claimed=parsed.nota_claimed
        )
    correct = sum(1 for b in p.blanks if parsed.letters.get(b) == p.gold[b])
    pc = correct / len(p.blanks)
    return ProblemScore(
        pc=pc, fc=int(pc == 1.0), unfinished=unfinished, nota_claimed=parsed.nota_claimed
    )


def _mean_block(scores: Sequence[ProblemScore]) -> dict:
    n = len(scores)
    if n == 0:
        return {"n": 0, "pc": None, "fc": None}
    return {
        "n": n,
        "pc": 100.0 * sum(s.pc for s in scores) / n,
        "fc": 100.0 * sum(s.fc for s in scores) / n,
    }


def aggregate(
    problems: Sequence[Problem],
    scores: Mapping[str, ProblemScore],
    exclude_unfinished: bool = False,
) -> dict:
    """Mean metrics per tier plus an overall row, as percentages."""
    rows: dict[str, list[ProblemScore]] = {}
    for p in problems:
        s = scores.get(p.id)
        if s is None or (exclude_unfinished and s.unfinished):
            continue
        rows.setdefault(p.tier, []).append(s)
        rows.setdefault("all", []).append(s)
    return {tier: _mean_block(ss) for tier, ss in sorted(rows.items())}


def random_baseline(
    problems: Sequence[Problem], trials: int = 10000, seed: int = 0
) -> dict:
    """Monte Carlo mean metrics of a uniform letter guesser, in percent.

    Each trial draws one letter per blank. Problems weigh equally, matching
    how real runs are averaged.
    """
    rng = np.random.default_rng(seed)
    pcs: list[float] = []
    fcs: list[float] = []
    for p in problems:
        if p.nota:
            pcs.append(0.0)
            fcs.append(0.0)
            continue
        sizes = np.array([len(p.options[b]) for b in p.blanks])
        gold = np.array([LETTERS.index(p.gold[b]) for b in p.blanks])
        draws = rng.integers(0, sizes, size=(trials, len(sizes)))
        correct = draws == gold
        pcs.append(float(correct.mean()))
        fcs.append(float(correct.all(axis=1).mean()))
    n = max(len(problems), 1)
    return {
        "n": len(problems),
        "trials": trials,
        "pc": 100.0 * sum(pcs) / n,
        "fc": 100.0 * sum(fcs) / n,
    }


# -- structure slices --------------------------------------------------------


def classify_pattern(p: Problem) -> tuple[str, ...]:
    """Shape labels of the blank-to-blank constraint graph.

    A-B: some constraint joins two blanks. A-B-C: three blanks form a simple
    path. cycle: at least three blanks form a cycle. Labels stack, so a
    triangle carries all three.
    """
    edges: set[tuple[str, str]] = set()
    for c in p.constraints:
        bs = c.blanks()
        if len(bs) == 2:
            edges.add(tuple(sorted(bs)))
    labels: list[str] = []
    if edges:
        labels.append("A-B")
    neighbor: dict[str, set[str]] = {}
    for a, b in edges:
        neighbor.setdefault(a, set()).add(b)
        neighbor.setdefault(b, set()).add(a)
    if any(len(ns) >= 2 for ns in neighbor.values()):
        labels.append("A-B-C")
    nodes = set(p.blanks)
    seen: set[str] = set()
    components = 0
    for start in sorted(nodes):
        if start in seen:
            continue
        components += 1
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            for v in neighbor.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    if len(edges) > len(nodes) - components:
        labels.append("cycle")
    return tuple(labels)


def pattern_slice(
    problems: Sequence[Problem], scores: Mapping[str, ProblemScore]
) -> dict:
    """Mean metrics per pattern label; problems count under every label
    they carry, and label-free problems land in "none"."""
    buckets: dict[str, list[ProblemScore]] = {}
    for p in problems:
        s = scores.get(p.id)
        if s is None:
            continue
        labels = classify_pattern(p) or ("none",)
        for label in labels:
            buckets.setdefault(label, []).append(s)
    return {label: _mean_block(ss) for label, ss in sorted(buckets.items())}


def option_order_slice(
    problems: Sequence[Problem],
    scores: Mapping[str, ProblemScore],
    parses: Mapping[str, ParsedAnswer] | None = None,
) -> dict:
    """Metrics grouped by where the gold option sits.

    Primary view: problems bucketed by the gold letter of blank 1.
    Secondary view (needs the raw parses): every blank bucketed by its own
    gold letter, scored by per-blank hit rate.
    """
    first: dict[str, list[ProblemScore]] = {}
    for p in problems:
        s = scores.get(p.id)
        if s is None or p.nota:
            continue
        letter = p.gold.get(p.blanks[0]) if p.blanks else None
        if letter is None:
            continue
        first.setdefault(letter, []).append(s)
    out = {"first_blank": {k: _mean_block(v) for k, v in sorted(first.items())}}

    if parses is not None:
        hits: dict[str, list[int]] = {}
        for p in problems:
            parsed = parses.get(p.id)
            if parsed is None or p.nota:
                continue
            for b in p.blanks:
                gold = p.gold[b]
                hits.setdefault(gold, []).append(int(parsed.letters.get(b) == gold))
        out["per_blank"] = {
            k: {"n": len(v), "accuracy": 100.0 * sum(v) / len(v)}
            for k, v in sorted(hits.items())
        }
    return out


def cross_tab(
    with_scores: Mapping[str, ProblemScore],
    without_scores: Mapping[str, ProblemScore],
) -> dict:
    """Bucket problems by full-accuracy with (K) and without (N) knowledge."""
    counts: Counter[str] = Counter()
    for pid, ws in with_scores.items():
        ns = without_scores.get(pid)
        if ns is None:
            continue
        bucket = f"N{'+' if ns.fc else '-'}K{'+' if ws.fc else '-'}"
        counts[bucket] += 1
    return {k: counts.get(k, 0) for k in ("N+K+", "N+K-", "N-K+", "N-K-")}


def nota_stats(
    problems: Sequence[Problem], scores: Mapping[str, ProblemScore]
) -> dict:
    """How often the nota escape hatch is used, rightly and wrongly."""
    nota = [scores[p.id] for p in problems if p.nota and p.id in scores]
    regular = [scores[p.id] for p in problems if not p.nota and p.id in scores]
    out = {"n_nota": len(nota), "n_regular": len(regular)}
    if nota:
        out["nota_fc"] = 100.0 * sum(s.fc for s in nota) / len(nota)
        out["nota_claim_rate"] = 100.0 * sum(s.nota_claimed for s in nota) / len(nota)
    if regular:
        out["false_claim_rate"] = 100.0 * sum(s.nota_claimed for s in regular) / len(regular)
    return out


def format_report(aggregates: Mapping[str, Mapping[str, dict]]) -> str:
    """Aligned text table: one row per tier, one column pair per setting.

    ``aggregates`` maps setting label to the output of ``aggregate``.
    """
    settings = list(aggregates)
    tiers = sorted({t for a in aggregates.values() for t in a})
    # stable, readable tier order
    order = [t for t in ("easy", "medium", "hard", "all") if t in tiers]
    order += [t for t in tiers if t not in order]
    header = ["tier".ljust(8)]
    for s in settings:
        header.append(f"{s} PC".rjust(12))
        header.append(f"{s} FC".rjust(12))
    lines = ["".join(header)]
    for tier in order:
        row = [tier.ljust(8)]
        for s in settings:
            block = aggregates[s].get(tier, {"n": 0, "pc": None, "fc": None})
            pc = "-" if block["pc"] is None else f"{block['pc']:.1f}"
            fc = "-" if block["fc"] is None else f"{block['fc']:.1f}"
            row.append(pc.rjust(12))
            row.append(fc.rjust(12))
        lines.append("".join(row))
    counts = aggregates[settings[0]] if settings else {}
    for tier in order:
        if tier in counts:
            lines.append(f"# {tier}: n={counts[tier]['n']}")
    return "\n".join(lines)
