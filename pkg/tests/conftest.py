"""Shared fixtures: deterministic encoder stubs and small vocabularies."""

from __future__ import annotations

import json

import numpy as np
import pytest

from pictopred.encoders import Subtoken
from pictopred.vocabulary import Keyword, PictogramEntry, Vocabulary


class StubEncoder:
    """Deterministic EncoderHandle for tests.

    Subtokens are whitespace words; ids come from ``word_ids`` (falling
    back to a stable per-word counter). Input embeddings come from
    ``input_table`` or are derived from the id. ``encode`` returns either a
    fixed array from ``encodings[text]`` or layer states derived
    deterministically from (layer, position, subtoken id).
    """

    def __init__(self, h=4, layers=4, word_ids=None, input_table=None, encodings=None,
                 encoder_id="stub"):
        self.hidden_size = h
        self.layers = layers
        self.encoder_id = encoder_id
        self.word_ids = dict(word_ids or {})
        self.input_table = {k: np.asarray(v, dtype=np.float64) for k, v in (input_table or {}).items()}
        self.encodings = {k: np.asarray(v, dtype=np.float64) for k, v in (encodings or {}).items()}
        self._next_id = 1000

    def _word_id(self, word):
        if word not in self.word_ids:
            self.word_ids[word] = self._next_id
            self._next_id += 1
        return self.word_ids[word]

    def subtokenize(self, text):
        out = []
        offset = 0
        for word in text.split():
            start = text.index(word, offset)
            out.append(Subtoken(id=self._word_id(word.lower()), start=start, end=start + len(word)))
            offset = start + len(word)
        return out

    def input_embedding(self, subtoken_id):
        if subtoken_id in self.input_table:
            return self.input_table[subtoken_id].copy()
        vec = np.zeros(self.hidden_size)
        vec[subtoken_id % self.hidden_size] = 1.0 + (subtoken_id % 7)
        return vec

    def encode(self, text):
        if text in self.encodings:
            return self.encodings[text].copy()
        subtokens = self.subtokenize(text)
        positions = 1 + len(subtokens) + 1  # marker + words + end
        states = np.zeros((self.layers, positions, self.hidden_size))
        ids = [0] + [st.id for st in subtokens] + [1]
        for layer in range(self.layers):
            for pos, sid in enumerate(ids):
                base = np.arange(self.hidden_size, dtype=np.float64)
                states[layer, pos] = np.sin(base + sid * 0.37 + layer * 1.7) + layer
        return states


class ConstantEncoder:
    """Encoder whose layer states are all ones (marker sum = n_layers)."""

    def __init__(self, h=4, layers=4):
        self.hidden_size = h
        self.layers = layers
        self.encoder_id = "constant-ones"

    def subtokenize(self, text):
        out = []
        offset = 0
        for word in text.split():
            start = text.index(word, offset)
            out.append(Subtoken(id=1, start=start, end=start + len(word)))
            offset = start + len(word)
        return out

    def input_embedding(self, subtoken_id):
        return np.ones(self.hidden_size)

    def encode(self, text):
        positions = 1 + len(self.subtokenize(text)) + 1
        return np.ones((self.layers, positions, self.hidden_size))


def entry(pid, *keywords, image_ref=None):
    """Shorthand PictogramEntry: keywords are terms or (term, definition)."""
    kws = []
    for kw in keywords:
        if isinstance(kw, tuple):
            kws.append(Keyword(term=kw[0], definition=kw[1]))
        else:
            kws.append(Keyword(term=kw))
    return PictogramEntry(id=pid, keywords=tuple(kws), image_ref=image_ref)


@pytest.fixture
def small_vocab():
    """Six entries covering MWEs and a shared-lemma (polysemous) term."""
    entries = [
        entry(3, "novo"),
        entry(5, "novo"),
        entry(7, ("banco", "instituição financeira onde se guarda dinheiro")),
        entry(8, ("banco", "assento comprido para sentar")),
        entry(12, ("fazer xixi", "urinar")),
        entry(21, "bola"),
    ]
    return Vocabulary({e.id: e for e in entries})


@pytest.fixture
def arasaac_dump(tmp_path):
    """ARASAAC-style dump file with shared lemmas and an MWE."""
    data = [
        {"_id": 7, "keywords": [{"keyword": "Banco", "meaning": "instituição financeira"}]},
        {"_id": 8, "keywords": [{"keyword": "banco", "meaning": "assento comprido"}]},
        {"_id": 9, "keywords": [{"keyword": "banco "}]},
        {"_id": 12, "keywords": [{"keyword": "fazer xixi", "meaning": "urinar"}]},
        {"_id": 15, "keywords": [{"keyword": "café da manhã", "meaning": "primeira refeição"}]},
        {"_id": 21, "keywords": [{"keyword": "bola", "meaning": "brinquedo redondo"},
                                  {"keyword": "bola"}]},
        {"_id": 30, "keywords": []},
    ]
    path = tmp_path / "dump.json"
    path.write_text(json.dumps(data, ensure_ascii=False), encoding="utf-8")
    return path
