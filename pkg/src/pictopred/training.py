"""Vocabulary swap and masked-prediction fine-tuning.

The trainable model is a compact BERT-style masked encoder whose input
embedding is weight-tied to the output projection. ``TinyTextBackend``
provides the desk-scale base encoder (2 layers, h=64, hash-bucket
subtokenizer) used by tests and CI; a pretrained full-scale backend can be
plugged through the same seams (see ``hf_backend``).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from hashlib import blake2b, sha256
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .embeddings import EmbeddingMatrix, caption_embedding
from .encoders import Subtoken
from .errors import (
    CheckpointIOError,
    DimensionMismatchError,
    DivergenceDetectedError,
    MissingRowError,
    NoMaskablePositionsError,
    UnknownTokenError,
    VersionMismatchError,
)
from .vocabulary import Vocabulary

RESERVED_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
PAD_INDEX, UNK_INDEX, CLS_INDEX, SEP_INDEX, MASK_INDEX = range(5)
NUM_RESERVED = len(RESERVED_TOKENS)
IGNORE_INDEX = -100

CHECKPOINT_FORMAT_VERSION = 1


class TokenTable:
    """Dense token -> index mapping: reserved tokens first, then pictogram
    ids ascending, then OOV literals in lexicographic order."""

    def __init__(self, tokens: Sequence[str], vocab_hash: str = ""):
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.vocab_hash = vocab_hash
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("token table contains duplicates")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TokenTable)
            and self.tokens == other.tokens
            and self.vocab_hash == other.vocab_hash
        )

    def index_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownTokenError(f"token {token!r} is not in the table") from None

    def get(self, token: str):
        return self._index.get(token)

    def token_at(self, index: int) -> str:
        return self.tokens[index]

    def sha256(self) -> str:
        digest = sha256()
        for tok in self.tokens:
            digest.update(tok.encode("utf-8") + b"\x00")
        return digest.hexdigest()


def build_token_table(picto_sentences: Sequence, vocab: Vocabulary) -> TokenTable:
    """Token table over the whole vocabulary plus every OOV literal that
    appears in the converted corpus."""
    id_tokens = [str(pid) for pid in vocab.entries]
    taken = set(RESERVED_TOKENS) | set(id_tokens)
    literals = set()
    for sent in picto_sentences:
        for tok in sent.tokens:
            if tok.kind == "oov_word" and tok.literal not in taken:
                literals.add(tok.literal)
    tokens = list(RESERVED_TOKENS) + id_tokens + sorted(literals)
    return TokenTable(tokens, vocab_hash=vocab.content_hash())


@dataclass
class TrainingConfig:
    """Fine-tuning hyperparameters; defaults follow the reference recipe."""

    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    schedule: str = "linear"
    batch_sequences: int = 768
    sequence_length: int = 13
    mask_fraction: float = 0.15
    corrupt_mask: float = 0.8
    corrupt_random: float = 0.1
    corrupt_keep: float = 0.1
    epochs: int = 200
    rng_seed: int = 0
    checkpoint_interval: int = 0
    micro_batch: int | None = None

    def __post_init__(self):
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask_fraction must be in (0, 1)")
        if abs(self.corrupt_mask + self.corrupt_random + self.corrupt_keep - 1.0) > 1e-9:
            raise ValueError("corruption split must sum to 1.0")
        if self.batch_sequences < 1 or self.sequence_length < 3:
            raise ValueError("batch_sequences and sequence_length out of range")
        if self.schedule != "linear":
            raise ValueError("only linear learning-rate decay is supported")

    @classmethod
    def paper_defaults(cls, strategy: str, **overrides) -> "TrainingConfig":
        """Reference recipe: 200 epochs for caption/synonyms embeddings,
        500 for the definition- and image-based ones."""
        epochs = 200 if strategy in ("caption", "synonyms") else 500
        return cls(epochs=overrides.pop("epochs", epochs), **overrides)

    @classmethod
    def from_file(cls, path) -> "TrainingConfig":
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls(**data)


@dataclass(frozen=True)
class EncoderConfig:
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_size: int = 128
    max_positions: int = 16
    dropout: float = 0.1


class MaskedEncoder(nn.Module):
    """BERT-style encoder with the input embedding tied to the output head.

    The prediction head applies the standard masked-LM transform
    (dense + GELU + LayerNorm) before the tied projection and bias.
    """

    def __init__(self, vocab_size: int, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        h = config.hidden_size
        self.token_embedding = nn.Embedding(vocab_size, h)
        self.position_embedding = nn.Embedding(config.max_positions, h)
        self.input_norm = nn.LayerNorm(h)
        self.input_dropout = nn.Dropout(config.dropout)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=h,
                nhead=config.num_heads,
                dim_feedforward=config.ffn_size,
                dropout=config.dropout,
                activation="gelu",
                batch_first=True,
            )
            for _ in range(config.num_layers)
        )
        self.head_dense = nn.Linear(h, h)
        self.head_norm = nn.LayerNorm(h)
        self.output_bias = nn.Parameter(torch.zeros(vocab_size))

    def _embed(self, input_ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(input_ids.shape[1], device=input_ids.device)
        x = self.token_embedding(input_ids) + self.position_embedding(positions)
        return self.input_dropout(self.input_norm(x))

    def layer_states(self, input_ids: torch.Tensor, attention_mask=None) -> list[torch.Tensor]:
        """Hidden states after each transformer layer, shape (B, T, h) each."""
        padding_mask = None
        if attention_mask is not None:
            padding_mask = ~attention_mask
        x = self._embed(input_ids)
        states = []
        for layer in self.layers:
            x = layer(x, src_key_padding_mask=padding_mask)
            states.append(x)
        return states

    def forward(self, input_ids: torch.Tensor, attention_mask=None) -> torch.Tensor:
        last = self.layer_states(input_ids, attention_mask)[-1]
        transformed = self.head_norm(F.gelu(self.head_dense(last)))
        # Weight tying: the output projection is the embedding transposed.
        return transformed @ self.token_embedding.weight.T + self.output_bias


class TinyTextBackend:
    """Desk-scale base encoder: random weights, hash-bucket subtokenizer.

    Implements the EncoderHandle protocol (subtokenize / input_embedding /
    encode) plus the base-model surface swap_vocabulary consumes
    (``special_embedding`` and the torch trunk).
    """

    def __init__(self, config: EncoderConfig | None = None, base_vocab_size: int = 2048,
                 seed: int = 0):
        self.config = config or EncoderConfig()
        self.base_vocab_size = base_vocab_size
        self.seed = seed
        torch.manual_seed(seed)
        self.model = MaskedEncoder(base_vocab_size, self.config)
        self.model.eval()
        self.hidden_size = self.config.hidden_size
        self.encoder_id = f"tiny:seed={seed}:h={self.hidden_size}:v={base_vocab_size}"

    def _bucket(self, word: str) -> int:
        digest = blake2b(word.encode("utf-8"), digest_size=8).digest()
        span = self.base_vocab_size - NUM_RESERVED
        return NUM_RESERVED + int.from_bytes(digest, "big") % span

    def subtokenize(self, text: str) -> list[Subtoken]:
        out = []
        offset = 0
        for word in text.split():
            start = text.index(word, offset)
            out.append(Subtoken(id=self._bucket(word.lower()), start=start, end=start + len(word)))
            offset = start + len(word)
        return out

    def input_embedding(self, subtoken_id: int) -> np.ndarray:
        return self.model.token_embedding.weight[subtoken_id].detach().numpy().copy()

    def encode(self, text: str) -> np.ndarray:
        ids = [CLS_INDEX] + [st.id for st in self.subtokenize(text)] + [SEP_INDEX]
        batch = torch.tensor([ids], dtype=torch.long)
        with torch.no_grad():
            states = self.model.layer_states(batch)
        return np.stack([s[0].numpy() for s in states])

    def special_embedding(self, token: str) -> np.ndarray:
        index = RESERVED_TOKENS.index(token)
        return self.model.token_embedding.weight[index].detach().numpy().copy()


@dataclass
class AdaptedModel:
    """Encoder with the pictogram token table swapped in."""

    model: MaskedEncoder
    table: TokenTable
    strategy: str
    encoder_config: EncoderConfig
    base_encoder_id: str

    @property
    def hidden_size(self) -> int:
        return self.encoder_config.hidden_size

    def model_id(self) -> str:
        return f"{self.strategy}:{self.table.sha256()[:12]}"


def swap_vocabulary(
    base: TinyTextBackend,
    table: TokenTable,
    matrix: EmbeddingMatrix,
    rng_seed: int = 0,
) -> AdaptedModel:
    """Replace the base encoder's vocabulary and input-embedding layer.

    Pictogram rows come from the matrix, reserved rows from the base
    encoder's special-token embeddings, OOV-literal rows from the caption
    embedding of the literal. The trunk is copied bit-exactly and the
    output projection re-ties to the new embedding with a zero bias.
    """
    h = base.hidden_size
    if matrix.h != h:
        raise DimensionMismatchError(f"matrix h={matrix.h} but encoder hidden size is {h}")
    rows = np.zeros((len(table), h), dtype=np.float32)
    for token in RESERVED_TOKENS:
        rows[table.index_of(token)] = base.special_embedding(token)
    for index, token in enumerate(table.tokens):
        if index < NUM_RESERVED:
            continue
        if token.isdigit():
            pid = int(token)
            if pid not in matrix.vectors:
                raise MissingRowError(f"embedding matrix has no row for pictogram id {pid}")
            rows[index] = matrix.vectors[pid]
        else:
            rows[index] = caption_embedding(base, token)
    torch.manual_seed(rng_seed)
    model = MaskedEncoder(len(table), base.config)
    trunk = {
        k: v
        for k, v in base.model.state_dict().items()
        if k not in ("token_embedding.weight", "output_bias")
    }
    model.load_state_dict(trunk, strict=False)
    with torch.no_grad():
        model.token_embedding.weight.copy_(torch.from_numpy(rows))
        model.output_bias.zero_()
    model.eval()
    return AdaptedModel(
        model=model,
        table=table,
        strategy=matrix.strategy,
        encoder_config=base.config,
        base_encoder_id=base.encoder_id,
    )


@dataclass
class MaskedBatch:
    input_ids: torch.Tensor
    labels: torch.Tensor
    selection_mask: torch.Tensor


def encode_sentences(
    table: TokenTable, sentences: Sequence[Sequence[str]], sequence_length: int,
    strict: bool = False,
) -> torch.Tensor:
    """Pack token-string sentences into (N, sequence_length) index rows:
    [CLS] tokens [SEP] padding. Content longer than sequence_length - 2 is
    rejected (cleaning guarantees it cannot occur)."""
    rows = []
    for sent in sentences:
        if len(sent) > sequence_length - 2:
            raise ValueError(
                f"sentence of {len(sent)} tokens exceeds sequence budget "
                f"{sequence_length - 2}: {sent!r}"
            )
        ids = [CLS_INDEX]
        for tok in sent:
            index = table.get(tok)
            if index is None:
                if strict:
                    raise UnknownTokenError(f"token {tok!r} is not in the table")
                index = UNK_INDEX
            ids.append(index)
        ids.append(SEP_INDEX)
        ids.extend([PAD_INDEX] * (sequence_length - len(ids)))
        rows.append(ids)
    return torch.tensor(rows, dtype=torch.long)


def mask_collate(
    batch: torch.Tensor,
    config: TrainingConfig,
    rng: np.random.Generator,
    table: TokenTable,
) -> MaskedBatch:
    """BERT-style corruption: per sequence, select floor(mask_fraction x
    maskable positions) positions (minimum 1, reserved/padding never
    eligible), then replace with [MASK] / a random non-reserved token /
    the original token at the configured 80/10/10 rates."""
    input_ids = batch.clone()
    labels = torch.full_like(batch, IGNORE_INDEX)
    selection = torch.zeros_like(batch, dtype=torch.bool)
    vocab_size = len(table)
    for row in range(batch.shape[0]):
        maskable = (batch[row] >= NUM_RESERVED).nonzero(as_tuple=True)[0]
        if maskable.numel() == 0:
            raise NoMaskablePositionsError(f"sequence {row} has no maskable positions")
        count = max(1, math.floor(config.mask_fraction * maskable.numel()))
        chosen = rng.choice(maskable.numpy(), size=count, replace=False)
        for position in sorted(int(p) for p in chosen):
            labels[row, position] = batch[row, position]
            selection[row, position] = True
            draw = rng.random()
            if draw < config.corrupt_mask:
                input_ids[row, position] = MASK_INDEX
            elif draw < config.corrupt_mask + config.corrupt_random:
                input_ids[row, position] = int(rng.integers(NUM_RESERVED, vocab_size))
            # else: keep the original token
    return MaskedBatch(input_ids=input_ids, labels=labels, selection_mask=selection)


def masked_cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), ignore_index=IGNORE_INDEX
    )


@dataclass
class TrainResult:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)


def _epoch_loss(model, ids, config, table, rng) -> float:
    losses = []
    with torch.no_grad():
        for start in range(0, ids.shape[0], config.batch_sequences):
            rows = ids[start : start + config.batch_sequences]
            batch = mask_collate(rows, config, rng, table)
            logits = model(batch.input_ids, attention_mask=batch.input_ids != PAD_INDEX)
            losses.append(float(masked_cross_entropy(logits, batch.labels)))
    return float(np.mean(losses))


def finetune(
    adapted: AdaptedModel,
    train_sentences: Sequence[Sequence[str]],
    val_sentences: Sequence[Sequence[str]],
    config: TrainingConfig,
    checkpoint_dir=None,
) -> TrainResult:
    """Masked-prediction fine-tuning with Adam, decoupled weight decay, and
    linear learning-rate decay to zero over the total step budget.

    Deterministic for a fixed ``config.rng_seed`` and single-worker data
    order. Raises DivergenceDetectedError if the loss becomes non-finite.
    """
    if not train_sentences or not val_sentences:
        raise ValueError("train and validation splits must be non-empty")
    model = adapted.model
    table = adapted.table
    torch.manual_seed(config.rng_seed)
    train_ids = encode_sentences(table, train_sentences, config.sequence_length)
    val_ids = encode_sentences(table, val_sentences, config.sequence_length)
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )
    n = train_ids.shape[0]
    steps_per_epoch = math.ceil(n / config.batch_sequences)
    total_steps = steps_per_epoch * config.epochs
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: max(0.0, 1.0 - step / total_steps)
    )
    rng = np.random.default_rng(config.rng_seed)
    micro = config.micro_batch or config.batch_sequences
    result = TrainResult()
    for epoch in range(config.epochs):
        model.train()
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_sequences):
            rows = train_ids[torch.from_numpy(perm[start : start + config.batch_sequences])]
            batch = mask_collate(rows, config, rng, table)
            optimizer.zero_grad(set_to_none=True)
            batch_loss = 0.0
            for sub in range(0, rows.shape[0], micro):
                ids = batch.input_ids[sub : sub + micro]
                labels = batch.labels[sub : sub + micro]
                logits = model(ids, attention_mask=ids != PAD_INDEX)
                loss = masked_cross_entropy(logits, labels) * (ids.shape[0] / rows.shape[0])
                loss.backward()
                batch_loss += float(loss.detach())
            if not math.isfinite(batch_loss):
                raise DivergenceDetectedError(f"non-finite loss at epoch {epoch}")
            optimizer.step()
            scheduler.step()
            epoch_losses.append(batch_loss)
        model.eval()
        val_rng = np.random.default_rng([config.rng_seed, epoch])
        result.train_losses.append(float(np.mean(epoch_losses)))
        result.val_losses.append(_epoch_loss(model, val_ids, config, table, val_rng))
        if (
            checkpoint_dir is not None
            and config.checkpoint_interval
            and (epoch + 1) % config.checkpoint_interval == 0
        ):
            save_checkpoint(adapted, Path(checkpoint_dir) / f"epoch-{epoch + 1:04d}", epoch=epoch + 1)
    model.eval()
    return result


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_checkpoint(adapted: AdaptedModel, path, epoch: int | None = None) -> None:
    """Checkpoint directory: manifest + token table + weight blob, each
    written atomically (temp file then rename)."""
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "strategy": adapted.strategy,
            "h": adapted.hidden_size,
            "backend": "masked-encoder",
            "encoder_config": asdict(adapted.encoder_config),
            "base_encoder_id": adapted.base_encoder_id,
            "token_table_sha256": adapted.table.sha256(),
            "vocab_sha256": adapted.table.vocab_hash,
            "epoch": epoch,
        }
        _atomic_write(directory / "manifest.json", json.dumps(manifest, indent=2).encode())
        table_blob = json.dumps(
            {"tokens": list(adapted.table.tokens), "vocab_sha256": adapted.table.vocab_hash},
            ensure_ascii=False,
        ).encode("utf-8")
        _atomic_write(directory / "token_table.json", table_blob)
        tmp = directory / "weights.pt.tmp"
        torch.save(adapted.model.state_dict(), tmp)
        os.replace(tmp, directory / "weights.pt")
    except OSError as exc:
        raise CheckpointIOError(f"cannot write checkpoint to {directory}: {exc}") from exc


def load_checkpoint(path, vocab: Vocabulary | None = None) -> AdaptedModel:
    """Restore an AdaptedModel from a checkpoint directory.

    If ``vocab`` is supplied, its content hash must match the hash recorded
    at build time (VersionMismatchError otherwise).
    """
    directory = Path(path)
    try:
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
        table_data = json.loads((directory / "token_table.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointIOError(f"cannot read checkpoint at {directory}: {exc}") from exc
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise VersionMismatchError(
            f"checkpoint format {manifest.get('format_version')} != {CHECKPOINT_FORMAT_VERSION}"
        )
    table = TokenTable(table_data["tokens"], vocab_hash=table_data.get("vocab_sha256", ""))
    if table.sha256() != manifest["token_table_sha256"]:
        raise VersionMismatchError("token table does not match the checkpoint manifest")
    if vocab is not None and vocab.content_hash() != manifest["vocab_sha256"]:
        raise VersionMismatchError(
            "checkpoint was built against a different vocabulary "
            f"(expected hash {manifest['vocab_sha256'][:12]}…)"
        )
    config = EncoderConfig(**manifest["encoder_config"])
    model = MaskedEncoder(len(table), config)
    try:
        state = torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    except Exception as exc:  # torch raises various types on corrupt blobs
        raise CheckpointIOError(f"cannot load weights from {directory}: {exc}") from exc
    model.eval()
    return AdaptedModel(
        model=model,
        table=table,
        strategy=manifest["strategy"],
        encoder_config=config,
        base_encoder_id=manifest.get("base_encoder_id", ""),
    )
