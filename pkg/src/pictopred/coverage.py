"""Cluster-based coverage of one sentence set over another.

Coverage is the fraction of target sentences assigned to a k-means cluster
that also contains at least one reference sentence, computed over sentence
embeddings of the union of both sets.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from sklearn.cluster import KMeans

from .corpus import NaturalSentence
from .errors import InvalidKError


def _as_texts(items: Sequence) -> list[str]:
    return [s.text if isinstance(s, NaturalSentence) else str(s) for s in items]


def coverage(
    target: Sequence,
    reference: Sequence,
    embedder: Callable[[str], np.ndarray],
    k: int,
    rng_seed: int = 0,
) -> float:
    """Coverage ratio of ``target`` over ``reference`` with ``k`` clusters.

    Both sets are embedded, clustered jointly with seeded k-means, and the
    ratio |{t in target : cluster(t) contains a reference sentence}| /
    |target| is returned. Deterministic for a fixed seed.
    """
    targets = _as_texts(target)
    references = _as_texts(reference)
    if not targets or not references:
        raise ValueError("both sentence sets must be non-empty")
    union = targets + references
    if k < 1 or k > len(union):
        raise InvalidKError(f"k={k} out of range for union of {len(union)} sentences")
    vectors = np.vstack([np.asarray(embedder(text), dtype=np.float64) for text in union])
    labels = KMeans(n_clusters=k, random_state=rng_seed, n_init=10).fit_predict(vectors)
    reference_clusters = set(labels[len(targets):])
    covered = sum(1 for label in labels[: len(targets)] if label in reference_clusters)
    return covered / len(targets)


def coverage_curve(
    target: Sequence,
    reference: Sequence,
    embedder: Callable[[str], np.ndarray],
    ks: Sequence[int],
    rng_seed: int = 0,
) -> dict[int, float]:
    """Coverage at each cluster count in ``ks`` (embeddings computed once)."""
    targets = _as_texts(target)
    references = _as_texts(reference)
    if not targets or not references:
        raise ValueError("both sentence sets must be non-empty")
    union = targets + references
    vectors = np.vstack([np.asarray(embedder(text), dtype=np.float64) for text in union])
    out: dict[int, float] = {}
    for k in ks:
        if k < 1 or k > len(union):
            raise InvalidKError(f"k={k} out of range for union of {len(union)} sentences")
        labels = KMeans(n_clusters=k, random_state=rng_seed, n_init=10).fit_predict(vectors)
        reference_clusters = set(labels[len(targets):])
        covered = sum(1 for label in labels[: len(targets)] if label in reference_clusters)
        out[k] = covered / len(targets)
    return out
