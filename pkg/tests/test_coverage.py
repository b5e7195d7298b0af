"""Cluster-coverage tests over fixture embeddings."""

import numpy as np
import pytest

from pictopred.coverage import coverage, coverage_curve
from pictopred.errors import InvalidKError


def planted_embedder(mapping):
    return lambda text: np.asarray(mapping[text], dtype=np.float64)


class TestCoverage:
    def test_single_cluster_covers_everything(self):
        rng = np.random.default_rng(0)
        texts = [f"s{i}" for i in range(12)]
        mapping = {t: rng.normal(size=3) for t in texts}
        embedder = planted_embedder(mapping)
        assert coverage(texts[:7], texts[7:], embedder, k=1) == 1.0

    def test_disjoint_clouds_with_two_clusters(self):
        rng = np.random.default_rng(1)
        target = [f"t{i}" for i in range(10)]
        reference = [f"r{i}" for i in range(10)]
        mapping = {t: np.array([0.0, 0.0]) + rng.normal(scale=0.05, size=2) for t in target}
        mapping |= {r: np.array([100.0, 100.0]) + rng.normal(scale=0.05, size=2) for r in reference}
        assert coverage(target, reference, planted_embedder(mapping), k=2) == 0.0

    def test_shared_cloud_fully_covered(self):
        rng = np.random.default_rng(2)
        target = [f"t{i}" for i in range(8)]
        reference = [f"r{i}" for i in range(8)]
        mapping = {name: rng.normal(scale=0.1, size=2) for name in target + reference}
        assert coverage(target, reference, planted_embedder(mapping), k=2) == 1.0

    def test_seeded_determinism(self):
        rng = np.random.default_rng(3)
        target = [f"t{i}" for i in range(30)]
        reference = [f"r{i}" for i in range(30)]
        mapping = {name: rng.normal(size=4) for name in target + reference}
        embedder = planted_embedder(mapping)
        a = coverage(target, reference, embedder, k=7, rng_seed=11)
        b = coverage(target, reference, embedder, k=7, rng_seed=11)
        assert a == b

    def test_k_larger_than_union_rejected(self):
        mapping = {"a": [0.0], "b": [1.0]}
        with pytest.raises(InvalidKError):
            coverage(["a"], ["b"], planted_embedder(mapping), k=3)
        with pytest.raises(InvalidKError):
            coverage(["a"], ["b"], planted_embedder(mapping), k=0)

    def test_empty_sets_rejected(self):
        with pytest.raises(ValueError):
            coverage([], ["a"], planted_embedder({"a": [0.0]}), k=1)

    def test_ratio_in_unit_interval(self):
        rng = np.random.default_rng(4)
        target = [f"t{i}" for i in range(20)]
        reference = [f"r{i}" for i in range(5)]
        mapping = {name: rng.normal(size=3) for name in target + reference}
        for k in (1, 2, 5, 10):
            ratio = coverage(target, reference, planted_embedder(mapping), k=k, rng_seed=0)
            assert 0.0 <= ratio <= 1.0

    def test_curve_matches_single_calls(self):
        rng = np.random.default_rng(5)
        target = [f"t{i}" for i in range(15)]
        reference = [f"r{i}" for i in range(15)]
        mapping = {name: rng.normal(size=3) for name in target + reference}
        embedder = planted_embedder(mapping)
        curve = coverage_curve(target, reference, embedder, ks=[1, 3, 5], rng_seed=2)
        for k, value in curve.items():
            assert value == coverage(target, reference, embedder, k=k, rng_seed=2)
