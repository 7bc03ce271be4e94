"""Dataset generation: from a loaded KG to problems.jsonl files.

One attempt is one independent walk of the construction path. Every
attempt derives its own RNG from (master seed, attempt index) via a stable
hash, so attempts can run on any number of workers and still produce the
same bytes: results are consumed in attempt order and the first ``count``
valid question graphs win, regardless of scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from . import __version__
from .csp import is_unique
from .errors import DataError, SamplingError, TierInfeasibleError
from .kg import KnowledgeGraph
from .knowledge import compose_knowledge
from .options import TIERS, make_nota, sample_options
from .problems import Problem
from .sampler import (
    SamplerConfig,
    downsample,
    khop_neighborhood,
    sample_center,
    select_blanks,
)

log = logging.getLogger(__name__)


def derive_seed(*parts) -> int:
    """Stable 64-bit sub-seed from arbitrary labeled parts.

    Uses a real hash, not Python's salted ``hash()``, so runs agree across
    processes and machines.
    """
    material = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class GeneratorConfig:
    """Full recipe for one dataset; serialized into the run manifest."""

    seed: int = 0
    count: int = 100  # target number of valid question graphs
    tiers: tuple[str, ...] = TIERS
    per_blank: int = 3
    nota: bool = False
    include_knowledge: bool = True
    center_degrees: tuple[int, ...] = (5, 7, 9)
    graph_sizes: tuple[int, ...] = (6, 7, 8, 9, 10, 11)
    reduce_multipliers: tuple[float, ...] = (1.1, 1.2, 1.3)
    blank_multipliers: tuple[float, ...] = (1.0, 1.1)
    hop_limit: int = 5
    layer_cap: int = 8
    noise_per_useful: int = 3
    max_redraws: int = 20
    attempt_factor: int = 60  # attempt budget = count * attempt_factor

    def __post_init__(self):
        unknown = set(self.tiers) - set(TIERS)
        if unknown:
            raise DataError(f"unknown tiers {sorted(unknown)}")
        if self.count < 1:
            raise DataError("count must be positive")
        if not 2 <= self.per_blank <= 26:
            raise DataError("per_blank must be between 2 and 26")
        if not self.graph_sizes or min(self.graph_sizes) < 2:
            raise DataError("graph_sizes must all be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping) -> "GeneratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise DataError(f"unknown config keys {sorted(unknown)}")
        coerced = dict(values)
        for key in (
            "tiers",
            "center_degrees",
            "graph_sizes",
            "reduce_multipliers",
            "blank_multipliers",
        ):
            if key in coerced and not isinstance(coerced[key], tuple):
                value = coerced[key]
                if isinstance(value, (list, set)):
                    coerced[key] = tuple(value)
                else:
                    coerced[key] = (value,)
        return cls(**coerced)


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines; values are JSON when parseable, else
    comma-separated lists, else bare strings."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            try:
                out[key] = json.loads(value)
            except json.JSONDecodeError:
                if "," in value:
                    out[key] = [_coerce_scalar(v.strip()) for v in value.split(",")]
                else:
                    out[key] = _coerce_scalar(value)
    return out


def _coerce_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _draw_sampler_config(cfg: GeneratorConfig, rng: random.Random) -> SamplerConfig:
    graph_size = rng.choice(sorted(cfg.graph_sizes))
    lo = math.ceil(graph_size / 4)
    hi = graph_size // 2
    blank_count = rng.randint(lo, hi)
    return SamplerConfig(
        graph_size=graph_size,
        blank_count=blank_count,
        reduce_multiplier=rng.choice(sorted(cfg.reduce_multipliers)),
        blank_multiplier=rng.choice(sorted(cfg.blank_multipliers)),
        center_degrees=tuple(sorted(cfg.center_degrees)),
        hop_limit=cfg.hop_limit,
        layer_cap=cfg.layer_cap,
    )


def _problem_id(index: int, tier: str, nota: bool) -> str:
    return f"kc-{index:06d}-{tier}" + ("-nota" if nota else "")


def run_attempt(
    g: KnowledgeGraph, cfg: GeneratorConfig, index: int
) -> list[Problem] | None:
    """One construction attempt; None when the walk dead-ends."""
    seed = derive_seed(cfg.seed, "attempt", index)
    rng = random.Random(seed)
    scfg = _draw_sampler_config(cfg, rng)
    try:
        center = sample_center(g, scfg, rng)
        neighborhood = khop_neighborhood(g, center, scfg, rng)
        answer = downsample(g, neighborhood, scfg, rng)
        question = select_blanks(answer, scfg, rng, seed=seed)
    except SamplingError:
        return None
    if not is_unique(g, question):
        return None

    tier_order = [t for t in TIERS if t in cfg.tiers]
    problems: list[Problem] = []
    for tier in tier_order:
        try:
            opts = sample_options(
                g,
                question,
                neighborhood,
                tier,
                rng,
                per_blank=cfg.per_blank,
                max_redraws=cfg.max_redraws,
            )
        except TierInfeasibleError:
            continue
        knowledge = None
        passage_meta = None
        if cfg.nota:
            try:
                opts = make_nota(g, question, opts, neighborhood, rng, cfg.max_redraws)
            except TierInfeasibleError:
                continue
        elif cfg.include_knowledge:
            passage = compose_knowledge(
                g, question, neighborhood, rng, cfg.noise_per_useful
            )
            knowledge = passage.triples
            passage_meta = {
                "useful": passage.useful_count,
                "noise": passage.noise_count,
                "short": passage.short,
            }
        meta = {
            "center": question.center,
            "graph_size": scfg.graph_size,
            "blank_count": scfg.blank_count,
            "reduce_multiplier": scfg.reduce_multiplier,
            "blank_multiplier": scfg.blank_multiplier,
            "version": __version__,
        }
        if passage_meta is not None:
            meta["knowledge"] = passage_meta
        if cfg.nota:
            meta["nota"] = True
        problems.append(
            Problem(
                id=_problem_id(index, tier, cfg.nota),
                tier=tier,
                constraints=question.constraints,
                blanks=question.blanks,
                options=dict(opts.options),
                gold={} if cfg.nota else opts.gold_letters(),
                nota=cfg.nota,
                knowledge=knowledge,
                seed=seed,
                meta=meta,
            )
        )
    return problems or None


@dataclass
class GenerationResult:
    problems: list[Problem] = field(default_factory=list)
    valid_graphs: int = 0
    attempts_used: int = 0
    elapsed: float = 0.0

    def by_tier(self) -> dict[str, list[Problem]]:
        out: dict[str, list[Problem]] = {}
        for p in self.problems:
            out.setdefault(p.tier, []).append(p)
        return out


def generate_dataset(
    g: KnowledgeGraph, cfg: GeneratorConfig, parallel: int = 1
) -> GenerationResult:
    """Run attempts until ``cfg.count`` valid question graphs exist.

    Output is byte-stable for a given (graph, config, seed) no matter how
    many workers run: attempts are examined strictly in index order.
    """
    started = time.monotonic()
    result = GenerationResult()
    budget = cfg.count * cfg.attempt_factor

    def consume(index: int, batch: list[Problem] | None) -> bool:
        result.attempts_used = index + 1
        if batch:
            result.valid_graphs += 1
            result.problems.extend(batch)
        return result.valid_graphs >= cfg.count

    if parallel <= 1:
        for index in range(budget):
            if consume(index, run_attempt(g, cfg, index)):
                break
    else:
        chunk = max(32, parallel * 8)
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            done = False
            for start in range(0, budget, chunk):
                indices = range(start, min(start + chunk, budget))
                for index, batch in zip(indices, pool.map(lambda i: run_attempt(g, cfg, i), indices)):
                    if consume(index, batch):
                        done = True
                        break
                if done:
                    break
    if result.valid_graphs < cfg.count:
        log.warning(
            "generation stopped at %d/%d valid graphs after %d attempts",
            result.valid_graphs,
            cfg.count,
            result.attempts_used,
        )
    result.elapsed = time.monotonic() - started
    return result


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: Mapping,
    inputs: Mapping,
    outputs: Mapping,
    counts: Mapping,
    started_at: str,
) -> Path:
    """Drop a manifest.json describing one run into its output directory."""
    path = Path(out_dir) / "manifest.json"
    body = {
        "command": command,
        "config": dict(config),
        "inputs": dict(inputs),
        "outputs": dict(outputs),
        "counts": dict(counts),
        "started_at": started_at,
        "finished_at": utc_now(),
        "version": __version__,
    }
    path.write_text(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()
