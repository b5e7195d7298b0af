"""Sentence corpus: ingestion, cleaning, statistics, and split assignment."""

from __future__ import annotations

import csv
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InvalidProportionsError,
    MalformedInputError,
    ScorerFailureError,
)

SOURCES = ("human_train", "human_test", "generated")
CONTEXTS = ("home", "school", "kitchen", "leisure", "event", "essential")
SPLITS = ("train", "test", "validation")


@dataclass(frozen=True)
class NaturalSentence:
    """A text sentence with its provenance tag."""

    text: str
    source: str = "human_train"
    context: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("sentence text must be non-empty")
        object.__setattr__(self, "text", self.text.strip())
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.context is not None and self.context not in CONTEXTS:
            raise ValueError(f"unknown context {self.context!r}")


@dataclass
class Corpus:
    """Sentences plus a split assignment (index -> train/test/validation)."""

    sentences: list
    split: dict[int, str] = field(default_factory=dict)

    def subset(self, name: str) -> list:
        return [self.sentences[i] for i in sorted(self.split) if self.split[i] == name]

    def sizes(self) -> dict[str, int]:
        counts = Counter(self.split.values())
        return {name: counts.get(name, 0) for name in SPLITS}


@dataclass
class CorpusStats:
    total_words: int
    unique_words: int
    total_sentences: int
    length_min: int
    length_max: int
    length_mean: float
    length_mode: int
    length_mode_count: int
    word_freq: Counter
    stopword_freq: Counter
    bigram_freq: Counter
    trigram_freq: Counter


def _row_to_sentence(row: dict, lineno) -> NaturalSentence:
    text = row.get("text")
    if not isinstance(text, str) or not text.strip():
        raise MalformedInputError(f"row {lineno}: missing or empty text")
    source = row.get("source") or "human_train"
    context = row.get("context") or None
    try:
        return NaturalSentence(text=text, source=source, context=context)
    except ValueError as exc:
        raise MalformedInputError(f"row {lineno}: {exc}") from exc


def ingest_collected(source) -> list[NaturalSentence]:
    """Read practitioner sentences from CSV or JSONL (columns/keys: text,
    source, context) and deduplicate by exact trimmed text, keeping the
    first occurrence."""
    path = Path(source)
    rows: list[NaturalSentence] = []
    if path.suffix.lower() == ".csv":
        try:
            with open(path, encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or "text" not in reader.fieldnames:
                    raise MalformedInputError(f"{path}: CSV needs a 'text' column")
                for lineno, row in enumerate(reader, start=2):
                    rows.append(_row_to_sentence(row, lineno))
        except (OSError, csv.Error) as exc:
            raise MalformedInputError(f"cannot read {path}: {exc}") from exc
    else:
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise MalformedInputError(f"cannot read {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInputError(f"line {lineno}: invalid JSON ({exc})") from exc
            if not isinstance(row, dict):
                raise MalformedInputError(f"line {lineno}: expected an object")
            rows.append(_row_to_sentence(row, lineno))
    seen: set[str] = set()
    unique: list[NaturalSentence] = []
    for sentence in rows:
        if sentence.text in seen:
            continue
        seen.add(sentence.text)
        unique.append(sentence)
    return unique


def whitespace_token_count(text: str) -> int:
    return len(text.split())


def clean(
    sentences: Sequence[NaturalSentence],
    ppl_scorer: Callable[[str], float],
    toxicity: Callable[[str], bool],
    min_len: int = 3,
    max_len: int = 11,
    token_counter: Callable[[str], int] | None = None,
) -> list[NaturalSentence]:
    """Filter a raw sentence batch.

    Stages, in order: exact dedup (lowercase+trim), toxicity removal,
    worst-quartile perplexity removal (scores strictly above the batch's
    75th percentile are dropped; ties at the threshold survive), and
    token-length bounds. Order of survivors is preserved.
    """
    counter = token_counter or whitespace_token_count
    seen: set[str] = set()
    unique: list[NaturalSentence] = []
    for sentence in sentences:
        key = sentence.text.strip().lower()
        if key in seen:
            continue
        seen.add(key)
        unique.append(sentence)
    nontoxic = [s for s in unique if not toxicity(s.text)]
    if not nontoxic:
        return []
    scores = []
    for s in nontoxic:
        try:
            scores.append(float(ppl_scorer(s.text)))
        except Exception as exc:  # noqa: BLE001 - scorer boundary
            raise ScorerFailureError(f"scorer failed on {s.text!r}: {exc}") from exc
    threshold = float(np.percentile(scores, 75.0))
    survivors = [s for s, score in zip(nontoxic, scores) if score <= threshold]
    return [s for s in survivors if min_len <= counter(s.text) <= max_len]


def allow_all_toxicity(_text: str) -> bool:
    """Toxicity stub that flags nothing (the classifier itself is pluggable)."""
    return False


_STRIP_CHARS = ".,;:!?…\"'()[]{}«»“”¿¡-"


def _stat_tokens(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens


def load_stopwords(path=None) -> frozenset[str]:
    """Stopword list: one word per line; defaults to the shipped Portuguese list."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("pictopred").joinpath("data/stopwords_pt.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def corpus_stats(sentences: Sequence, stopwords: frozenset[str] = frozenset()) -> CorpusStats:
    """Word, length, and n-gram statistics. N-grams never cross sentence
    boundaries; the word/stopword counters partition the token stream."""
    texts = [s.text if isinstance(s, NaturalSentence) else str(s) for s in sentences]
    if not texts:
        raise ValueError("corpus_stats needs at least one sentence")
    word_freq: Counter = Counter()
    stopword_freq: Counter = Counter()
    bigram_freq: Counter = Counter()
    trigram_freq: Counter = Counter()
    lengths = []
    for text in texts:
        tokens = _stat_tokens(text)
        lengths.append(len(tokens))
        for token in tokens:
            (stopword_freq if token in stopwords else word_freq)[token] += 1
        for i in range(len(tokens) - 1):
            bigram_freq[(tokens[i], tokens[i + 1])] += 1
        for i in range(len(tokens) - 2):
            trigram_freq[(tokens[i], tokens[i + 1], tokens[i + 2])] += 1
    total_words = sum(lengths)
    mode, mode_count = Counter(lengths).most_common(1)[0]
    return CorpusStats(
        total_words=total_words,
        unique_words=len(set(word_freq) | set(stopword_freq)),
        total_sentences=len(texts),
        length_min=min(lengths),
        length_max=max(lengths),
        length_mean=total_words / len(texts),
        length_mode=mode,
        length_mode_count=mode_count,
        word_freq=word_freq,
        stopword_freq=stopword_freq,
        bigram_freq=bigram_freq,
        trigram_freq=trigram_freq,
    )


def split(
    sentences: Sequence,
    proportions: tuple[float, float, float] = (0.68, 0.16, 0.16),
    rng_seed: int = 0,
) -> Corpus:
    """Seeded random split into train/test/validation.

    Sizes are the floor of each proportion times the corpus size, with the
    rounding remainder assigned to the train split; splits are disjoint and
    exhaustive by construction.
    """
    if len(proportions) != len(SPLITS):
        raise InvalidProportionsError(f"expected {len(SPLITS)} proportions")
    if any(p < 0 for p in proportions):
        raise InvalidProportionsError("proportions must be non-negative")
    if abs(sum(proportions) - 1.0) > 1e-9:
        raise InvalidProportionsError(f"proportions sum to {sum(proportions)}, not 1.0")
    n = len(sentences)
    sizes = [math.floor(n * p) for p in proportions]
    sizes[0] += n - sum(sizes)  # remainder to train
    order = list(range(n))
    random.Random(rng_seed).shuffle(order)
    assignment: dict[int, str] = {}
    start = 0
    for name, size in zip(SPLITS, sizes):
        for idx in order[start : start + size]:
            assignment[idx] = name
        start += size
    return Corpus(sentences=list(sentences), split=assignment)


def save_corpus_jsonl(sentences: Sequence[NaturalSentence], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(
                json.dumps(
                    {"text": s.text, "source": s.source, "context": s.context},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_corpus_jsonl(path) -> list[NaturalSentence]:
    return ingest_collected(path)
