"""Encoder protocol helpers: layer reductions and shape validation."""

import numpy as np
import pytest

from pictopred.encoders import (
    Subtoken,
    marker_mean_last_layers,
    marker_sum_last_layers,
    safe_encode,
    sentence_embedding,
)
from pictopred.errors import EncoderFailureError

from conftest import StubEncoder


class TestLayerReductions:
    def test_sum_and_mean_over_last_four(self):
        states = np.zeros((6, 3, 2))
        for layer in range(6):
            states[layer, 0] = [layer, 2 * layer]
        assert np.array_equal(marker_sum_last_layers(states), [2 + 3 + 4 + 5, 2 * 14])
        assert np.allclose(marker_mean_last_layers(states), [14 / 4, 28 / 4])

    def test_sentence_embedding_is_marker_mean(self):
        enc = StubEncoder(h=4, layers=5)
        text = "uma frase qualquer"
        states = enc.encode(text)
        expected = states[-4:, 0, :].mean(axis=0)
        assert np.allclose(sentence_embedding(enc, text), expected, atol=1e-12)


class TestSafeEncode:
    def test_wraps_backend_exceptions(self):
        class Broken(StubEncoder):
            def encode(self, text):
                raise RuntimeError("backend down")

        with pytest.raises(EncoderFailureError):
            safe_encode(Broken(h=2), "oi")

    def test_rejects_too_few_layers(self):
        enc = StubEncoder(h=2, layers=2)
        with pytest.raises(EncoderFailureError):
            safe_encode(enc, "oi")

    def test_rejects_wrong_rank(self):
        class Flat(StubEncoder):
            def encode(self, text):
                return np.zeros((4, 3))

        with pytest.raises(EncoderFailureError):
            safe_encode(Flat(h=2), "oi")

    def test_subtoken_spans_cover_words(self):
        enc = StubEncoder(h=2)
        text = "ele quer bola"
        subtokens = enc.subtokenize(text)
        assert [text[st.start:st.end] for st in subtokens] == ["ele", "quer", "bola"]
        assert all(isinstance(st, Subtoken) for st in subtokens)
