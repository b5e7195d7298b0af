"""Model scoring: pseudo-perplexity, grid-size top-n accuracy, reports.

Pseudo-perplexity feeds each test sentence unmasked with labels equal to
the input and exponentiates the corpus-level cross-entropy. Top-n accuracy
queries the model with left context only plus an appended mask token,
mirroring how an AAC author extends an in-construction sentence; a
full-context variant is available for ablation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import torch

from .errors import UnknownTokenError, ZeroProbabilityError
from .training import (
    CLS_INDEX,
    MASK_INDEX,
    NUM_RESERVED,
    SEP_INDEX,
    AdaptedModel,
)
from .vocabulary import Vocabulary

GRID_SIZES = (1, 9, 18, 25, 36)

# Reference results of the full-scale fine-tuning runs (BERTimbau-sized
# encoder, full corpus, GPU). Attached to reports for comparison display;
# never asserted at desk scale.
TABLE2_REFERENCE = {
    "caption": {"ppl": 15.433, "acc": {1: 0.237, 9: 0.530, 18: 0.620, 25: 0.657, 36: 0.702}},
    "synonyms": {"ppl": 14.282, "acc": {1: 0.225, 9: 0.511, 18: 0.604, 25: 0.647, 36: 0.698}},
    "definition_input_mean": {"ppl": 23.368, "acc": {1: 0.209, 9: 0.492, 18: 0.580, 25: 0.627, 36: 0.673}},
    "image_plus_synonyms": {"ppl": 122.407, "acc": {1: 0.042, 9: 0.169, 18: 0.220, 25: 0.255, 36: 0.293}},
    "definition_mean_last": {"ppl": 22.496, "acc": {1: 0.019, 9: 0.122, 18: 0.206, 25: 0.246, 36: 0.295}},
    "image": {"ppl": 106.130, "acc": {1: 0.007, 9: 0.037, 18: 0.078, 25: 0.112, 36: 0.146}},
    "image_plus_caption": {"ppl": 89.685, "acc": {1: 0.007, 9: 0.038, 18: 0.076, 25: 0.111, 36: 0.146}},
    "definition_cls_last": {"ppl": 89.107, "acc": {1: 0.003, 9: 0.062, 18: 0.117, 25: 0.153, 36: 0.203}},
}


class ScorerHandle(Protocol):
    """Probability source over a fixed token table."""

    vocab_size: int

    def token_index(self, token: str) -> int: ...

    def token_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        """Distribution over the table for the position following ``prefix``."""
        ...

    def sentence_token_probs(self, tokens: Sequence[str]) -> np.ndarray:
        """Gold-token probability at each content position of an unmasked pass."""
        ...


class ModelScorer:
    """ScorerHandle over an AdaptedModel."""

    def __init__(self, adapted: AdaptedModel):
        self.adapted = adapted
        self.table = adapted.table
        self.vocab_size = len(adapted.table)
        adapted.model.eval()

    def token_index(self, token: str) -> int:
        return self.table.index_of(token)

    def _forward_probs(self, ids: list[int]) -> torch.Tensor:
        batch = torch.tensor([ids], dtype=torch.long)
        with torch.no_grad():
            logits = self.adapted.model(batch)
        return torch.softmax(logits[0], dim=-1)

    def sentence_token_probs(self, tokens: Sequence[str]) -> np.ndarray:
        indices = [self.token_index(tok) for tok in tokens]
        ids = [CLS_INDEX] + indices + [SEP_INDEX]
        probs = self._forward_probs(ids)
        gold = torch.tensor(indices)
        positions = torch.arange(1, 1 + len(indices))
        return probs[positions, gold].numpy().astype(np.float64)

    def token_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        ids = [CLS_INDEX] + [self.token_index(tok) for tok in prefix] + [MASK_INDEX]
        probs = self._forward_probs(ids)
        return probs[len(ids) - 1].numpy().astype(np.float64)

    def token_distribution_full(self, tokens: Sequence[str], position: int) -> np.ndarray:
        """Ablation variant: mask ``position`` inside the full sentence."""
        indices = [self.token_index(tok) for tok in tokens]
        indices[position] = MASK_INDEX
        ids = [CLS_INDEX] + indices + [SEP_INDEX]
        probs = self._forward_probs(ids)
        return probs[1 + position].numpy().astype(np.float64)


def pseudo_perplexity(scorer: ScorerHandle, sentences: Sequence[Sequence[str]]) -> float:
    """Exponentiated corpus cross-entropy over all gold-token positions.

    Computed in natural log; identical to the base-2 form
    2 ** (-(1/N) * sum(log2 p)).
    """
    if not sentences:
        raise ValueError("sentences must be non-empty")
    log_probs: list[float] = []
    for index, sentence in enumerate(sentences):
        probs = scorer.sentence_token_probs(sentence)
        for p in probs:
            if p == 0.0:
                raise ZeroProbabilityError(
                    f"gold token scored zero in sentence {index}", sentence_index=index
                )
            log_probs.append(math.log(p))
    return math.exp(-math.fsum(log_probs) / len(log_probs))


def _gold_rank(dist: np.ndarray, gold: int) -> int:
    """Rank of the gold token (0-based), ties broken by ascending index."""
    pg = dist[gold]
    higher = int((dist > pg).sum())
    tied_before = int((dist[:gold] == pg).sum())
    return higher + tied_before


def topn_accuracy(
    scorer: ScorerHandle,
    sentences: Sequence[Sequence[str]],
    ns: Sequence[int] = GRID_SIZES,
) -> dict[int, float]:
    """Fraction of positions whose gold token ranks within the top n.

    Every position is queried with its left context only (the first token
    with an empty prefix, i.e. just the sentence-start marker).
    """
    if not sentences:
        raise ValueError("sentences must be non-empty")
    hits = {n: 0 for n in ns}
    total = 0
    for sentence in sentences:
        for t in range(len(sentence)):
            dist = scorer.token_distribution(sentence[:t])
            rank = _gold_rank(dist, scorer.token_index(sentence[t]))
            for n in ns:
                if rank < n:
                    hits[n] += 1
            total += 1
    return {n: hits[n] / total for n in ns}


@dataclass
class EvalReport:
    strategy: str
    ppl: float
    acc: dict[int, float]
    test_size: int
    config_hash: str
    reference: dict | None = None

    def __post_init__(self):
        ns = sorted(self.acc)
        values = [self.acc[n] for n in ns]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("accuracies must lie in [0, 1]")
        if any(a > b for a, b in zip(values, values[1:])):
            raise ValueError("accuracy must be non-decreasing in n")
        if self.ppl < 1.0:
            raise ValueError("pseudo-perplexity of a probability model is >= 1")

    def to_json(self) -> str:
        payload = {
            "strategy": self.strategy,
            "ppl": self.ppl,
            "acc": {str(n): self.acc[n] for n in sorted(self.acc)},
            "test_size": self.test_size,
            "config_hash": self.config_hash,
        }
        if self.reference is not None:
            payload["reference"] = {
                "ppl": self.reference["ppl"],
                "acc": {str(n): v for n, v in sorted(self.reference["acc"].items())},
            }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        reference = None
        if data.get("reference"):
            reference = {
                "ppl": data["reference"]["ppl"],
                "acc": {int(n): v for n, v in data["reference"]["acc"].items()},
            }
        return cls(
            strategy=data["strategy"],
            ppl=data["ppl"],
            acc={int(n): v for n, v in data["acc"].items()},
            test_size=data["test_size"],
            config_hash=data["config_hash"],
            reference=reference,
        )


def evaluate(
    adapted: AdaptedModel,
    test_sentences: Sequence[Sequence[str]],
    ns: Sequence[int] = GRID_SIZES,
    attach_reference: bool = False,
) -> EvalReport:
    """Score a model on tokenized test sentences and assemble the report."""
    scorer = ModelScorer(adapted)
    ppl = pseudo_perplexity(scorer, test_sentences)
    acc = topn_accuracy(scorer, test_sentences, ns)
    config_hash = hashlib.sha256(
        json.dumps(
            {
                "ns": sorted(ns),
                "token_table": adapted.table.sha256(),
                "protocol": "left-context-mask",
            }
        ).encode()
    ).hexdigest()[:16]
    reference = TABLE2_REFERENCE.get(adapted.strategy) if attach_reference else None
    return EvalReport(
        strategy=adapted.strategy,
        ppl=ppl,
        acc=dict(acc),
        test_size=len(test_sentences),
        config_hash=config_hash,
        reference=reference,
    )


@dataclass(frozen=True)
class Prediction:
    token: str
    caption: str
    probability: float
    image_ref: str | None = None


def rank_distribution(dist: np.ndarray) -> np.ndarray:
    """Indices sorted by descending probability, ties by ascending index."""
    return np.lexsort((np.arange(len(dist)), -dist))


def render_predictions(
    adapted: AdaptedModel,
    prefix,
    k: int = 6,
    vocab: Vocabulary | None = None,
) -> list[Prediction]:
    """Top-k next-pictogram candidates with display metadata.

    ``prefix`` is a PictoSentence or a sequence of token-table strings.
    Reserved tokens never appear in the output; probabilities descend.
    """
    tokens = prefix.token_strings() if hasattr(prefix, "token_strings") else list(prefix)
    scorer = ModelScorer(adapted)
    dist = scorer.token_distribution(tokens)
    out: list[Prediction] = []
    for index in rank_distribution(dist):
        if index < NUM_RESERVED:
            continue
        token = adapted.table.token_at(int(index))
        caption = token
        image_ref = None
        if token.isdigit() and vocab is not None:
            entry = vocab.entries.get(int(token))
            if entry is not None:
                caption = entry.caption
                image_ref = entry.image_ref
        out.append(Prediction(token=token, caption=caption,
                              probability=float(dist[index]), image_ref=image_ref))
        if len(out) == k:
            break
    return out
