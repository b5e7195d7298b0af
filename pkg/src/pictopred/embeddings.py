"""Replacement input-embedding construction for the pictogram vocabulary.

Eight strategies are supported, mirroring the model variants evaluated in
the experiments: caption, synonyms, three definition-based extractions,
raw image vectors, and the two image+text combinations.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import EncoderHandle, ImageEncoderHandle, safe_encode
from .errors import (
    BuildFailedError,
    DimensionMismatchError,
    MissingImageError,
    UnknownSubtokenError,
)
from .vocabulary import PictogramEntry, Vocabulary

STRATEGIES = (
    "caption",
    "synonyms",
    "definition_input_mean",
    "definition_cls_last",
    "definition_mean_last",
    "image",
    "image_plus_caption",
    "image_plus_synonyms",
)

_MATRIX_MAGIC = "picto-embedding-matrix-v1"


def validate_strategy(name: str) -> str:
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
    return name


@dataclass
class EmbeddingMatrix:
    """One vector per pictogram id, tagged with how it was built."""

    vectors: dict[int, np.ndarray]
    strategy: str
    h: int
    encoder_id: str
    degenerate_ids: frozenset[int] = frozenset()

    def __post_init__(self):
        validate_strategy(self.strategy)
        for pid, vec in self.vectors.items():
            if vec.shape != (self.h,):
                raise DimensionMismatchError(
                    f"vector for id {pid} has shape {vec.shape}, expected ({self.h},)"
                )

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class BuildReport:
    """Per-entry failures recorded while building a matrix."""

    failed: dict[int, str] = field(default_factory=dict)
    fallback_ids: list[int] = field(default_factory=list)

    @property
    def failure_count(self) -> int:
        return len(self.failed)


def caption_embedding(encoder: EncoderHandle, caption: str) -> np.ndarray:
    """Mean of the encoder's input-embedding rows over the caption's subtokens.

    A single-subtoken caption returns that embedding row exactly.
    """
    if not caption.strip():
        raise ValueError("caption must be non-empty")
    subtokens = encoder.subtokenize(caption)
    if not subtokens:
        raise UnknownSubtokenError(f"subtokenizer cannot cover {caption!r}")
    rows = [np.asarray(encoder.input_embedding(st.id)) for st in subtokens]
    if len(rows) == 1:
        return rows[0]
    return np.mean(rows, axis=0)


def synonyms_embedding(encoder: EncoderHandle, entry: PictogramEntry) -> np.ndarray:
    """Mean of caption embeddings over every keyword term of the entry."""
    vecs = [caption_embedding(encoder, kw.term) for kw in entry.keywords]
    if len(vecs) == 1:
        return vecs[0]
    return np.mean(vecs, axis=0)


def definition_text(entry: PictogramEntry) -> str:
    """Keywords and definitions concatenated in keyword order.

    Missing definitions contribute the keyword alone.
    """
    parts = []
    for kw in entry.keywords:
        parts.append(kw.term)
        if kw.definition:
            parts.append(kw.definition)
    return " ".join(parts)


def definition_embedding(encoder: EncoderHandle, entry: PictogramEntry, variant: str) -> np.ndarray:
    """Definition-based vector.

    Variants:
        input_mean: mean of input embeddings of the definition's subtokens.
        cls_last: last-layer hidden state at the sentence-start marker.
        mean_last: mean of last-layer hidden states over all positions.
    """
    text = definition_text(entry)
    if variant == "input_mean":
        return caption_embedding(encoder, text)
    states = safe_encode(encoder, text)
    if variant == "cls_last":
        return states[-1, 0, :]
    if variant == "mean_last":
        return states[-1].mean(axis=0)
    raise ValueError(f"unknown definition variant {variant!r}")


def load_image_bytes(entry: PictogramEntry, images_dir=None) -> bytes:
    """Resolve the entry's bitmap from a local directory or a local path."""
    if images_dir is not None:
        path = Path(images_dir) / f"{entry.id}.png"
        if path.exists():
            return path.read_bytes()
        raise MissingImageError(f"no image file for id {entry.id} under {images_dir}")
    if entry.image_ref is None:
        raise MissingImageError(f"entry {entry.id} has no image_ref")
    path = Path(entry.image_ref)
    if not path.exists():
        raise MissingImageError(
            f"image for id {entry.id} not found at {entry.image_ref!r} "
            "(remote refs must be downloaded first)"
        )
    return path.read_bytes()


def image_embedding(
    img_encoder: ImageEncoderHandle,
    entry: PictogramEntry,
    expected_h: int | None = None,
    images_dir=None,
) -> np.ndarray:
    """Vector for the entry's pictogram bitmap."""
    vec = np.asarray(img_encoder.encode_image(load_image_bytes(entry, images_dir)))
    if expected_h is not None and vec.shape != (expected_h,):
        raise DimensionMismatchError(
            f"image encoder yields d_img={vec.shape}, model expects h={expected_h} "
            "and no projection is configured"
        )
    return vec


def combine(text_vec: np.ndarray, img_vec: np.ndarray) -> np.ndarray:
    """Elementwise mean of a text vector and an image vector."""
    if text_vec.shape != img_vec.shape:
        raise DimensionMismatchError(
            f"cannot combine shapes {text_vec.shape} and {img_vec.shape}"
        )
    return (text_vec + img_vec) / 2.0


def _entry_vector(entry, strategy, encoder, img_encoder, images_dir, h):
    if strategy == "caption":
        return caption_embedding(encoder, entry.caption)
    if strategy == "synonyms":
        return synonyms_embedding(encoder, entry)
    if strategy == "definition_input_mean":
        return definition_embedding(encoder, entry, "input_mean")
    if strategy == "definition_cls_last":
        return definition_embedding(encoder, entry, "cls_last")
    if strategy == "definition_mean_last":
        return definition_embedding(encoder, entry, "mean_last")
    if strategy == "image":
        return image_embedding(img_encoder, entry, expected_h=h, images_dir=images_dir)
    if strategy == "image_plus_caption":
        img = image_embedding(img_encoder, entry, expected_h=h, images_dir=images_dir)
        return combine(caption_embedding(encoder, entry.caption), img)
    if strategy == "image_plus_synonyms":
        img = image_embedding(img_encoder, entry, expected_h=h, images_dir=images_dir)
        return combine(synonyms_embedding(encoder, entry), img)
    raise ValueError(f"unknown strategy {strategy!r}")


def build_embedding_matrix(
    vocab: Vocabulary,
    strategy: str,
    encoder: EncoderHandle,
    img_encoder: ImageEncoderHandle | None = None,
    *,
    fallback: str = "caption",
    max_failure_fraction: float = 0.01,
    images_dir=None,
) -> tuple[EmbeddingMatrix, BuildReport]:
    """Build one vector per vocabulary id under the given strategy.

    Entries whose primary strategy fails fall back to the caption embedding
    (``fallback="caption"``) or to a zero vector flagged as degenerate
    (``fallback="zero"``); every fallback is recorded in the report. The
    build aborts if more than ``max_failure_fraction`` of entries fail
    their primary strategy.
    """
    validate_strategy(strategy)
    if strategy.startswith("image") and img_encoder is None:
        raise ValueError(f"strategy {strategy!r} requires an image encoder")
    if fallback not in ("caption", "zero"):
        raise ValueError(f"fallback must be 'caption' or 'zero', got {fallback!r}")
    h = int(encoder.hidden_size)
    report = BuildReport()
    vectors: dict[int, np.ndarray] = {}
    degenerate: set[int] = set()
    for pid, entry in vocab.entries.items():
        try:
            vec = _entry_vector(entry, strategy, encoder, img_encoder, images_dir, h)
        except Exception as exc:  # noqa: BLE001 - collected into the report
            report.failed[pid] = f"{type(exc).__name__}: {exc}"
            report.fallback_ids.append(pid)
            if fallback == "caption":
                vec = caption_embedding(encoder, entry.caption)
            else:
                vec = np.zeros(h, dtype=np.float32)
                degenerate.add(pid)
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (h,):
            raise DimensionMismatchError(
                f"entry {pid}: got shape {vec.shape}, expected ({h},)"
            )
        vectors[pid] = vec
    if report.failure_count > max_failure_fraction * len(vocab):
        raise BuildFailedError(
            f"{report.failure_count}/{len(vocab)} entries failed strategy {strategy!r} "
            f"(limit {max_failure_fraction:.0%}); first errors: "
            + "; ".join(f"{k}: {v}" for k, v in list(report.failed.items())[:3])
        )
    matrix = EmbeddingMatrix(
        vectors=vectors,
        strategy=strategy,
        h=h,
        encoder_id=encoder.encoder_id,
        degenerate_ids=frozenset(degenerate),
    )
    return matrix, report


def save_matrix(matrix: EmbeddingMatrix, path) -> None:
    """Binary matrix file: JSON header line, then (uint32 id, h float32) rows."""
    header = {
        "magic": _MATRIX_MAGIC,
        "strategy": matrix.strategy,
        "h": matrix.h,
        "encoder_id": matrix.encoder_id,
        "count": len(matrix.vectors),
        "degenerate_ids": sorted(matrix.degenerate_ids),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for pid in sorted(matrix.vectors):
            fh.write(struct.pack("<I", pid))
            fh.write(matrix.vectors[pid].astype("<f4").tobytes())


def load_matrix(path) -> EmbeddingMatrix:
    """Load a matrix written by :func:`save_matrix` (bit-exact round trip)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("magic") != _MATRIX_MAGIC:
            raise ValueError(f"{path} is not an embedding matrix file")
        h = int(header["h"])
        row_bytes = 4 + 4 * h
        vectors: dict[int, np.ndarray] = {}
        for _ in range(int(header["count"])):
            raw = fh.read(row_bytes)
            if len(raw) != row_bytes:
                raise ValueError(f"{path} is truncated")
            (pid,) = struct.unpack("<I", raw[:4])
            vectors[pid] = np.frombuffer(raw[4:], dtype="<f4").copy()
    return EmbeddingMatrix(
        vectors=vectors,
        strategy=header["strategy"],
        h=h,
        encoder_id=header["encoder_id"],
        degenerate_ids=frozenset(header.get("degenerate_ids", ())),
    )


def export_matrix_jsonl(matrix: EmbeddingMatrix, path) -> None:
    """Human-inspectable JSONL dump of a matrix (debugging aid)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "strategy": matrix.strategy,
                    "h": matrix.h,
                    "encoder_id": matrix.encoder_id,
                    "count": len(matrix.vectors),
                }
            )
            + "\n"
        )
        for pid in sorted(matrix.vectors):
            row = {"id": pid, "vector": [float(x) for x in matrix.vectors[pid]]}
            fh.write(json.dumps(row) + "\n")
