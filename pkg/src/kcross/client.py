"""Responders: things that turn a prompt into completion text.

Three kinds: an HTTP client for OpenAI-compatible chat endpoints with
retries, backoff and a request-rate cap; an oracle that answers from a
recorded deterministic solve (for wiring tests and upper bounds); and a
uniform random guesser. Self-consistency voting over multiple samples
also lives here.
"""

from __future__ import annotations

import logging
import os
import random
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import httpx

from .csp import staged_solve, verify_all_solve
from .errors import TransportError
from .kg import KnowledgeGraph
from .options import letter_for
from .problems import Problem
from .prompts import ParsedAnswer, render_staged_body, render_verify_all_body

log = logging.getLogger(__name__)

API_KEY_VAR = "KC_API_KEY"

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class Completion:
    text: str
    finished: bool = True  # False when the endpoint truncated the sample


@dataclass
class ResponderConfig:
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.1
    sample_count: int = 1
    max_tokens: int = 2048
    timeout: float = 60.0
    max_attempts: int = 4
    backoff: float = 0.5  # seconds, doubled per retry
    rate_limit: tuple[int, float] | None = None  # (requests, window seconds)


class Responder(Protocol):
    def respond(self, prompt: str, problem: Problem | None = None) -> list[Completion]:
        ...


class RateLimiter:
    """Sliding-window limiter: at most ``limit`` acquisitions per ``window``
    seconds. Clock and sleep are injectable so tests can drive time."""

    def __init__(
        self,
        limit: int,
        window: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if limit < 1 or window <= 0:
            raise ValueError("rate limit needs limit >= 1 and window > 0")
        self.limit = limit
        self.window = window
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()

    def acquire(self) -> None:
        while True:
            now = self._clock()
            while self._stamps and now - self._stamps[0] >= self.window:
                self._stamps.popleft()
            if len(self._stamps) < self.limit:
                self._stamps.append(now)
                return
            self._sleep(self.window - (now - self._stamps[0]))


@dataclass
class TransportStats:
    requests: int = 0
    retries: int = 0
    failures: int = 0
    rate_limited: int = 0  # responses that came back 429


class HTTPResponder:
    """POSTs chat-completion requests and retries transient failures.

    Retryable: 429, 5xx, and transport-level errors. Each retry waits
    backoff * 2^attempt seconds. A sample whose finish_reason is "length"
    is flagged unfinished so scoring can treat the response as cut off.
    """

    def __init__(
        self,
        cfg: ResponderConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        if not cfg.endpoint:
            raise TransportError("no endpoint configured")
        self.cfg = cfg
        self.stats = TransportStats()
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_VAR)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            transport=transport, headers=headers, timeout=cfg.timeout
        )
        self._limiter = (
            RateLimiter(cfg.rate_limit[0], cfg.rate_limit[1], clock=clock, sleep=sleep)
            if cfg.rate_limit
            else None
        )

    def close(self) -> None:
        self._client.close()

    def respond(self, prompt: str, problem: Problem | None = None) -> list[Completion]:
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "n": self.cfg.sample_count,
            "max_tokens": self.cfg.max_tokens,
        }
        last_status: int | None = None
        last_error = "no attempt made"
        for attempt in range(self.cfg.max_attempts):
            if attempt:
                self.stats.retries += 1
                self._sleep(self.cfg.backoff * (2 ** (attempt - 1)))
            if self._limiter is not None:
                self._limiter.acquire()
            self.stats.requests += 1
            try:
                resp = self._client.post(self.cfg.endpoint, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            last_status = resp.status_code
            if resp.status_code == 429:
                self.stats.rate_limited += 1
            if resp.status_code in RETRYABLE_STATUSES:
                last_error = f"status {resp.status_code}"
                log.warning("retryable status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                self.stats.failures += 1
                raise TransportError(
                    f"endpoint returned {resp.status_code}: {resp.text[:200]}",
                    last_status=resp.status_code,
                )
            return self._parse_choices(resp)
        self.stats.failures += 1
        raise TransportError(
            f"gave up after {self.cfg.max_attempts} attempts ({last_error})",
            last_status=last_status,
        )

    def _parse_choices(self, resp: httpx.Response) -> list[Completion]:
        try:
            body = resp.json()
            choices = body["choices"]
            out = []
            for ch in choices:
                text = ch["message"]["content"]
                finished = ch.get("finish_reason") != "length"
                out.append(Completion(text=text or "", finished=finished))
        except (KeyError, TypeError, ValueError) as exc:
            self.stats.failures += 1
            raise TransportError(f"malformed completion payload: {exc}") from exc
        if not out:
            raise TransportError("completion payload had no choices")
        return out


class OracleResponder:
    """Replies with a rendered deterministic solve of the actual problem.

    Useful as a known-perfect subject for end-to-end harness runs. The
    verification source is the supplied graph, else the problem's knowledge
    passage, else the gold facts themselves.
    """

    def __init__(
        self,
        graph: KnowledgeGraph | None = None,
        strategy: str = "verify-all",
        sample_count: int = 1,
    ):
        if strategy not in ("staged", "verify-all"):
            raise ValueError(f"unknown oracle strategy {strategy!r}")
        self.graph = graph
        self.strategy = strategy
        self.sample_count = sample_count

    def _graph_for(self, problem: Problem) -> KnowledgeGraph:
        if self.graph is not None:
            return self.graph
        mini = problem.knowledge_graph()
        if mini is not None:
            return mini
        return problem.gold_fact_graph()

    def respond(self, prompt: str, problem: Problem | None = None) -> list[Completion]:
        if problem is None:
            raise ValueError("the oracle needs the problem, not just its prompt")
        g = self._graph_for(problem)
        opts = problem.option_assignment()
        if self.strategy == "staged":
            tr = staged_solve(g, problem, opts)
            text = render_staged_body(problem, tr)
        else:
            tr = verify_all_solve(g, problem, opts)
            text = render_verify_all_body(problem, tr)
        return [Completion(text=text)] * self.sample_count


class RandomResponder:
    """Uniform letter guesses; the live counterpart of the Monte Carlo
    baseline, handy for smoke tests.

    Seeding is per problem id, so answers do not depend on evaluation
    order or worker count.
    """

    def __init__(self, seed: int = 0, sample_count: int = 1):
        self.seed = seed
        self.sample_count = sample_count

    def respond(self, prompt: str, problem: Problem | None = None) -> list[Completion]:
        if problem is None:
            raise ValueError("the random responder needs the problem for option counts")
        rng = random.Random(f"{self.seed}:{problem.id}")
        out = []
        for _ in range(self.sample_count):
            parts = [
                f"{b}: {letter_for(rng.randrange(len(problem.options[b])))}"
                for b in problem.blanks
            ]
            out.append(Completion(text=", ".join(parts)))
        return out


def self_consistency(parses: Sequence[ParsedAnswer], problem: Problem) -> ParsedAnswer:
    """Plurality vote per blank across samples.

    Unanswered samples abstain for that blank. Ties go to the letter whose
    vote arrived in the earliest sample. The nota claim needs a strict
    majority of samples.
    """
    if not parses:
        return ParsedAnswer()
    letters: dict[str, str] = {}
    for b in problem.blanks:
        votes: dict[str, list[int]] = {}
        for i, parsed in enumerate(parses):
            letter = parsed.letters.get(b)
            if letter is not None:
                votes.setdefault(letter, []).append(i)
        if not votes:
            continue
        letters[b] = min(votes, key=lambda l: (-len(votes[l]), votes[l][0]))
    claims = sum(1 for parsed in parses if parsed.nota_claimed)
    return ParsedAnswer(letters=letters, nota_claimed=claims * 2 > len(parses))
