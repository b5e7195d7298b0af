"""Synthetic sentence generation against a pluggable completion backend.

Two prompting strategies: few-shot prompts built from groups of 10
human-composed sentences, and vocabulary-driven prompts built from groups
of 20 terms plus 3-6 retrieved example sentences. Generation runs are
recorded to replay fixtures keyed by prompt hash so corpus builds are
reproducible without the paid backend.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .corpus import NaturalSentence
from .errors import (
    BackendUnavailableError,
    MissingFixtureError,
    WrongExampleCountError,
    WrongGroupSizeError,
)

EXAMPLE_GROUP_SIZE = 10
VOCAB_GROUP_SIZE = 20
TERMS_SAMPLED_PER_GROUP = 5

_EXAMPLES_HEADER = "This is a list of distinct Portuguese sentences in direct order:"
_VOCAB_HEADER = (
    "These are examples of Portuguese sentences using the words in this vocabulary: {terms}."
)
_EXAMPLE_PREFIX_RE = re.compile(r"^\s*Example\s+\d+\s*[:.]?\s*", re.IGNORECASE)


def _texts(items) -> list[str]:
    return [item.text if isinstance(item, NaturalSentence) else str(item) for item in items]


def build_example_prompt(examples: Sequence) -> str:
    """Few-shot prompt from exactly 10 sentences, ending with the dangling
    "Example 11:" line the backend is asked to continue."""
    texts = _texts(examples)
    if len(texts) != EXAMPLE_GROUP_SIZE:
        raise WrongGroupSizeError(
            f"example prompt needs exactly {EXAMPLE_GROUP_SIZE} sentences, got {len(texts)}"
        )
    lines = [_EXAMPLES_HEADER]
    lines += [f"Example {k}: {text}" for k, text in enumerate(texts, start=1)]
    lines.append(f"Example {len(texts) + 1}:")
    return "\n\n".join(lines)


def build_vocab_prompt(terms: Sequence[str], examples: Sequence) -> str:
    """Vocabulary prompt from exactly 20 quoted terms and 3-6 examples."""
    if len(terms) != VOCAB_GROUP_SIZE:
        raise WrongGroupSizeError(
            f"vocabulary prompt needs exactly {VOCAB_GROUP_SIZE} terms, got {len(terms)}"
        )
    texts = _texts(examples)
    if not 3 <= len(texts) <= 6:
        raise WrongExampleCountError(
            f"vocabulary prompt needs 3 to 6 example sentences, got {len(texts)}"
        )
    quoted = ", ".join(f'"{t}"' for t in terms)
    lines = [_VOCAB_HEADER.format(terms=quoted)]
    lines += [f"Example {k}: {text}" for k, text in enumerate(texts, start=1)]
    lines.append(f"Example {len(texts) + 1}:")
    return "\n\n".join(lines)


def select_examples_for_terms(
    terms: Sequence[str], pool: Sequence[NaturalSentence], rng_seed: int
) -> list[NaturalSentence]:
    """Pick 5 of the terms at random and sample 3-6 pool sentences containing
    any of them; backfill with random pool sentences when fewer than 3 match."""
    if not pool:
        raise ValueError("sentence pool must be non-empty")
    rng = random.Random(rng_seed)
    picked = rng.sample(list(terms), min(TERMS_SAMPLED_PER_GROUP, len(terms)))
    patterns = [re.compile(rf"\b{re.escape(t)}\b") for t in picked]
    matching = [s for s in pool if any(p.search(s.text.lower()) for p in patterns)]
    target = rng.randint(3, 6)
    if len(matching) >= 3:
        return rng.sample(matching, min(target, len(matching)))
    chosen = list(matching)
    rest = [s for s in pool if s not in chosen]
    rng.shuffle(rest)
    chosen.extend(rest[: max(0, min(target, len(pool)) - len(chosen))])
    return chosen


def example_prompts(sentences: Sequence[NaturalSentence], rng_seed: int) -> list[str]:
    """Shuffle the pool (seeded) and build one prompt per full group of 10."""
    pool = list(sentences)
    random.Random(rng_seed).shuffle(pool)
    groups = [
        pool[i : i + EXAMPLE_GROUP_SIZE]
        for i in range(0, len(pool) - EXAMPLE_GROUP_SIZE + 1, EXAMPLE_GROUP_SIZE)
    ]
    return [build_example_prompt(g) for g in groups]


def vocab_prompts(
    terms: Sequence[str], pool: Sequence[NaturalSentence], rng_seed: int
) -> list[str]:
    """Shuffle vocabulary terms (seeded), group by 20, and build one prompt
    per group with retrieved example sentences."""
    shuffled = list(terms)
    rng = random.Random(rng_seed)
    rng.shuffle(shuffled)
    prompts = []
    for i in range(0, len(shuffled) - VOCAB_GROUP_SIZE + 1, VOCAB_GROUP_SIZE):
        group = shuffled[i : i + VOCAB_GROUP_SIZE]
        examples = select_examples_for_terms(group, pool, rng_seed=rng.randrange(2**31))
        prompts.append(build_vocab_prompt(group, examples))
    return prompts


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class GeneratorClient(ABC):
    """Text-completion backend: live HTTP or deterministic replay."""

    mode: str

    @abstractmethod
    def complete(self, prompt: str, max_items: int = 1) -> list[str]:
        """Return ``max_items`` completion strings for the prompt."""


class ReplayClient(GeneratorClient):
    """Replays completions recorded in a fixture file (JSONL of
    ``{"prompt_sha256": hex, "completions": [str]}``)."""

    mode = "replay"

    def __init__(self, fixture_path):
        self.fixture_path = Path(fixture_path)
        self._records: dict[str, list[str]] = {}
        if self.fixture_path.exists():
            with open(self.fixture_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._records[record["prompt_sha256"]] = list(record["completions"])

    def complete(self, prompt: str, max_items: int = 1) -> list[str]:
        key = prompt_sha256(prompt)
        if key not in self._records:
            raise MissingFixtureError(
                f"no recorded completions for prompt {key[:12]}… in {self.fixture_path}"
            )
        return self._records[key][:max_items]


def record_fixture_line(fixture_path, prompt: str, completions: list[str]) -> None:
    """Append one replay record under an exclusive file lock."""
    from filelock import FileLock

    fixture_path = Path(fixture_path)
    record = {"prompt_sha256": prompt_sha256(prompt), "completions": completions}
    with FileLock(str(fixture_path) + ".lock"):
        with open(fixture_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class RecordingClient(GeneratorClient):
    """Wraps a live client and records every completion to a fixture file."""

    def __init__(self, inner: GeneratorClient, fixture_path):
        self.inner = inner
        self.fixture_path = Path(fixture_path)
        self.mode = inner.mode

    def complete(self, prompt: str, max_items: int = 1) -> list[str]:
        completions = self.inner.complete(prompt, max_items)
        record_fixture_line(self.fixture_path, prompt, completions)
        return completions


class HTTPCompletionClient(GeneratorClient):
    """Minimal client for an OpenAI-style ``/completions`` endpoint."""

    mode = "live"

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 max_tokens: int = 512, temperature: float = 0.8, timeout: float = 60.0,
                 transport=None):
        import httpx

        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.max_tokens = max_tokens
        self.temperature = temperature
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def complete(self, prompt: str, max_items: int = 1) -> list[str]:
        import httpx

        payload = {
            "model": self.model,
            "prompt": prompt,
            "n": max_items,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }
        try:
            response = self._client.post(f"{self.base_url}/completions", json=payload)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(f"completion backend failed: {exc}") from exc
        data = response.json()
        return [choice.get("text", "") for choice in data.get("choices", [])]


def parse_completion(text: str) -> list[str]:
    """Split a completion into sentences: one per line, tolerant of
    "Example N:" prefixes; items shorter than 2 characters are dropped."""
    items = []
    for line in text.splitlines():
        line = _EXAMPLE_PREFIX_RE.sub("", line).strip()
        if len(line) >= 2:
            items.append(line)
    return items


class _RateLimiter:
    """Spaces calls so at most ``per_minute`` start in any minute."""

    def __init__(self, per_minute: float):
        self.interval = 60.0 / per_minute
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self):
        with self._lock:
            now = time.monotonic()
            delay = max(0.0, self._next_at - now)
            self._next_at = max(now, self._next_at) + self.interval
        if delay > 0:
            time.sleep(delay)


def augment(
    client: GeneratorClient,
    prompts: Sequence[str],
    max_items: int = 1,
    parallelism: int = 1,
    rate_limit_per_min: float | None = None,
) -> list[NaturalSentence]:
    """Run every prompt through the backend and parse the completions into
    generated sentences. Duplicates are kept; dedup happens in cleaning."""
    limiter = _RateLimiter(rate_limit_per_min) if rate_limit_per_min else None

    def run(prompt: str) -> list[str]:
        if limiter:
            limiter.wait()
        items: list[str] = []
        for completion in client.complete(prompt, max_items):
            items.extend(parse_completion(completion))
        return items

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            per_prompt = list(pool.map(run, prompts))
    else:
        per_prompt = [run(p) for p in prompts]
    return [
        NaturalSentence(text=text, source="generated")
        for items in per_prompt
        for text in items
    ]
