"""Natural-language to pictogram-sequence conversion.

Pipeline per sentence: strip punctuation, tokenize, lemmatize each word,
greedily merge adjacent lemmas that form a multiword expression from the
vocabulary, then map every lemma to a pictogram id. Lemmas with several
candidate pictograms are disambiguated by nearest-cosine match between the
token's contextual vector and precomputed pictogram sense vectors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .embeddings import definition_text
from .encoders import EncoderHandle, marker_sum_last_layers, safe_encode
from .errors import SpanOutOfRangeError
from .vocabulary import PictogramEntry, Vocabulary

_WORD_RE = re.compile(r"\w+(?:-\w+)*", re.UNICODE)


@dataclass(frozen=True)
class PictoToken:
    """Either a resolved pictogram or a kept out-of-vocabulary word."""

    kind: str  # "pictogram" | "oov_word"
    literal: str
    id: int | None = None

    def __post_init__(self):
        if self.kind not in ("pictogram", "oov_word"):
            raise ValueError(f"bad token kind {self.kind!r}")
        if self.kind == "pictogram" and self.id is None:
            raise ValueError("pictogram token needs an id")
        if not self.literal:
            raise ValueError("token literal must be non-empty")


@dataclass(frozen=True)
class PictoSentence:
    tokens: tuple[PictoToken, ...]
    source_text: str

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("PictoSentence needs at least one token")

    def token_strings(self) -> list[str]:
        """Token-table strings: pictogram ids as decimals, literals as-is."""
        return [
            str(tok.id) if tok.kind == "pictogram" else tok.literal
            for tok in self.tokens
        ]


def _lemma_spans(
    text: str,
    lexicon: frozenset[str] | set[str],
    lemmatizer: Callable[[str], str],
) -> list[tuple[str, int, int]]:
    """Lemma tokens with their source character spans.

    MWE merging is greedy left-to-right longest-match over lemmas; a merged
    token's span runs from the first to the last merged word.
    """
    words = [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text)]
    lemmas = [lemmatizer(w) for w, _, _ in words]
    max_len = max((lemma.count(" ") + 1 for lemma in lexicon), default=1)
    out: list[tuple[str, int, int]] = []
    i = 0
    while i < len(lemmas):
        merged = None
        for width in range(min(max_len, len(lemmas) - i), 1, -1):
            candidate = " ".join(lemmas[i : i + width])
            if candidate in lexicon:
                merged = (candidate, words[i][1], words[i + width - 1][2], width)
                break
        if merged is not None:
            lemma, start, end, width = merged
            out.append((lemma, start, end))
            i += width
        else:
            out.append((lemmas[i], words[i][1], words[i][2]))
            i += 1
    return out


def tokenize_mwe(
    text: str,
    lexicon: frozenset[str] | set[str],
    lemmatizer: Callable[[str], str],
) -> list[str]:
    """Lemmatized tokens of a sentence with lexicon MWEs merged."""
    if not text.strip():
        raise ValueError("text must be non-empty")
    return [lemma for lemma, _, _ in _lemma_spans(text, lexicon, lemmatizer)]


def encode_pictogram_sense(encoder: EncoderHandle, entry: PictogramEntry) -> np.ndarray:
    """Sense vector of a pictogram: encode its keyword+definition text and
    sum the last four layers' hidden states at the sentence-start marker."""
    states = safe_encode(encoder, definition_text(entry))
    return marker_sum_last_layers(states)


def encode_token_in_context(
    encoder: EncoderHandle, sentence_text: str, token_span: tuple[int, int]
) -> np.ndarray:
    """Contextual vector for the token occupying ``token_span``.

    Per subtoken overlapping the span, sum the last four layers' states at
    its position; the token vector is the mean over those subtokens (MWEs
    therefore get the mean representation of their parts).
    """
    start, end = token_span
    if start < 0 or end > len(sentence_text) or start >= end:
        raise SpanOutOfRangeError(f"span {token_span} outside sentence of length {len(sentence_text)}")
    subtokens = encoder.subtokenize(sentence_text)
    states = safe_encode(encoder, sentence_text)
    vectors = []
    for j, st in enumerate(subtokens):
        if st.start < end and st.end > start:
            vectors.append(states[-4:, 1 + j, :].sum(axis=0))
    if not vectors:
        raise SpanOutOfRangeError(f"span {token_span} covers no subtokens")
    if len(vectors) == 1:
        return vectors[0]
    return np.mean(vectors, axis=0)


def _cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        # A zero vector carries no direction; treat as maximally unrelated.
        return 1.0
    return 1.0 - float(np.dot(a, b)) / (na * nb)


def disambiguate(
    context_vec: np.ndarray, candidates: Sequence[tuple[int, np.ndarray]]
) -> int:
    """1-nearest-neighbor over cosine distance; ties break to the lowest id."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if len(candidates) == 1:
        return candidates[0][0]
    best_id = None
    best_dist = None
    for pid, sense in sorted(candidates, key=lambda c: c[0]):
        dist = _cosine_distance(np.asarray(context_vec, dtype=np.float64),
                                np.asarray(sense, dtype=np.float64))
        if best_dist is None or dist < best_dist:
            best_id, best_dist = pid, dist
    return best_id


def sentence_to_picto(
    text: str,
    vocab: Vocabulary,
    encoder: EncoderHandle,
    sense_cache: dict[int, np.ndarray],
    lemmatizer: Callable[[str], str] | None = None,
) -> PictoSentence:
    """Convert one sentence to a pictogram-token sequence.

    Lemmas with no vocabulary candidate are kept as ``oov_word`` tokens.
    Missing sense vectors are computed on demand and stored into
    ``sense_cache`` (the vocabulary is static during conversion, so caching
    is safe).
    """
    if lemmatizer is None:
        from .lemmatizer import lemmatize as lemmatizer
    spans = _lemma_spans(text, vocab.mwe_lexicon, lemmatizer)
    tokens: list[PictoToken] = []
    for lemma, start, end in spans:
        ids = vocab.lookup_term(lemma)
        if not ids:
            tokens.append(PictoToken(kind="oov_word", literal=lemma))
        elif len(ids) == 1:
            tokens.append(PictoToken(kind="pictogram", literal=lemma, id=ids[0]))
        else:
            context = encode_token_in_context(encoder, text, (start, end))
            candidates = []
            for pid in ids:
                if pid not in sense_cache:
                    sense_cache[pid] = encode_pictogram_sense(encoder, vocab.entries[pid])
                candidates.append((pid, sense_cache[pid]))
            chosen = disambiguate(context, candidates)
            tokens.append(PictoToken(kind="pictogram", literal=lemma, id=chosen))
    return PictoSentence(tokens=tuple(tokens), source_text=text)


def build_sense_cache(
    vocab: Vocabulary, encoder: EncoderHandle, ids: Sequence[int] | None = None
) -> dict[int, np.ndarray]:
    """Precompute sense vectors for the given ids (default: whole vocabulary)."""
    cache: dict[int, np.ndarray] = {}
    for pid in ids if ids is not None else vocab.entries:
        cache[pid] = encode_pictogram_sense(encoder, vocab.entries[pid])
    return cache


def save_sense_cache(cache: dict[int, np.ndarray], path, encoder_id: str, h: int) -> None:
    """JSONL sense-cache file with a header recording encoder identity."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"encoder_id": encoder_id, "h": h}) + "\n")
        for pid in sorted(cache):
            fh.write(json.dumps({"id": pid, "vector": [float(x) for x in cache[pid]]}) + "\n")


def load_sense_cache(path) -> tuple[dict[int, np.ndarray], str, int]:
    """Load a sense cache; returns (cache, encoder_id, h)."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        cache = {}
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            cache[int(row["id"])] = np.asarray(row["vector"], dtype=np.float64)
    return cache, header["encoder_id"], int(header["h"])


# --- picto-corpus JSONL ---


def save_picto_corpus(sentences: Sequence[PictoSentence], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            record = {
                "source_text": sent.source_text,
                "tokens": [
                    {"kind": "pictogram", "id": tok.id, "literal": tok.literal}
                    if tok.kind == "pictogram"
                    else {"kind": "oov_word", "literal": tok.literal}
                    for tok in sent.tokens
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_picto_corpus(path) -> list[PictoSentence]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tokens = tuple(
                PictoToken(
                    kind=tok["kind"],
                    literal=tok.get("literal") or str(tok.get("id")),
                    id=tok.get("id"),
                )
                for tok in record["tokens"]
            )
            sentences.append(PictoSentence(tokens=tokens, source_text=record["source_text"]))
    return sentences
