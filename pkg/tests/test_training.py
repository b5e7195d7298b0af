"""Token table, vocabulary swap, masking collator, and training tests."""

import json

import numpy as np
import pytest
import torch

from pictopred.embeddings import EmbeddingMatrix, caption_embedding
from pictopred.errors import (
    CheckpointIOError,
    DimensionMismatchError,
    MissingRowError,
    NoMaskablePositionsError,
    UnknownTokenError,
    VersionMismatchError,
)
from pictopred.textpicto import PictoSentence, PictoToken
from pictopred.training import (
    CLS_INDEX,
    IGNORE_INDEX,
    MASK_INDEX,
    NUM_RESERVED,
    PAD_INDEX,
    RESERVED_TOKENS,
    SEP_INDEX,
    EncoderConfig,
    MaskedEncoder,
    TinyTextBackend,
    TokenTable,
    TrainingConfig,
    build_token_table,
    encode_sentences,
    finetune,
    load_checkpoint,
    mask_collate,
    masked_cross_entropy,
    save_checkpoint,
    swap_vocabulary,
)

from pipeline_fixtures import bigram_sentences, tiny_pipeline, toy_vocabulary


def picto(pid):
    return PictoToken(kind="pictogram", literal=f"w{pid}", id=pid)


def oov(literal):
    return PictoToken(kind="oov_word", literal=literal)


class TestTokenTable:
    def test_ordering_reserved_ids_literals(self):
        vocab = toy_vocabulary(3)
        corpus = [
            PictoSentence(tokens=(picto(2), oov("zebra"), oov("abacaxi")), source_text="x")
        ]
        table = build_token_table(corpus, vocab)
        assert table.tokens[:NUM_RESERVED] == RESERVED_TOKENS
        assert table.tokens[NUM_RESERVED:] == ("1", "2", "3", "abacaxi", "zebra")

    def test_paper_example_ids_present(self):
        entries = {pid: toy_vocabulary(1).entries[1] for pid in (1,)}
        from pictopred.vocabulary import Keyword, PictogramEntry, Vocabulary

        vocab = Vocabulary(
            {
                pid: PictogramEntry(id=pid, keywords=(Keyword(term=f"t{pid}"),))
                for pid in (6481, 31141, 16713)
            }
        )
        corpus = [
            PictoSentence(
                tokens=(picto(6481), picto(31141), picto(16713)), source_text="x"
            )
        ]
        table = build_token_table(corpus, vocab)
        assert set(table.tokens) == set(RESERVED_TOKENS) | {"6481", "16713", "31141"}
        assert table.tokens[NUM_RESERVED:] == ("6481", "16713", "31141")

    def test_empty_corpus_keeps_vocab_ids(self):
        vocab = toy_vocabulary(4)
        table = build_token_table([], vocab)
        assert len(table) == NUM_RESERVED + 4

    def test_oov_literal_included(self):
        vocab = toy_vocabulary(2)
        corpus = [PictoSentence(tokens=(oov("xyzzy"),), source_text="xyzzy")]
        table = build_token_table(corpus, vocab)
        assert "xyzzy" in table

    def test_index_lookup_and_unknown(self):
        table = TokenTable(RESERVED_TOKENS + ("1",))
        assert table.index_of("1") == NUM_RESERVED
        with pytest.raises(UnknownTokenError):
            table.index_of("nope")

    def test_hash_depends_on_tokens(self):
        a = TokenTable(RESERVED_TOKENS + ("1",))
        b = TokenTable(RESERVED_TOKENS + ("2",))
        assert a.sha256() != b.sha256()


class TestTrainingConfig:
    def test_paper_defaults_caption(self):
        config = TrainingConfig.paper_defaults("caption")
        assert config.learning_rate == 1e-5
        assert (config.beta1, config.beta2) == (0.9, 0.999)
        assert config.weight_decay == 0.01
        assert config.epochs == 200
        assert config.batch_sequences * config.sequence_length == 9984

    def test_paper_defaults_definition_and_image(self):
        for strategy in ("definition_cls_last", "image", "image_plus_caption"):
            assert TrainingConfig.paper_defaults(strategy).epochs == 500

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainingConfig(mask_fraction=0.0)
        with pytest.raises(ValueError):
            TrainingConfig(corrupt_mask=0.5, corrupt_random=0.1, corrupt_keep=0.1)

    def test_from_json_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"learning_rate": 0.001, "epochs": 3}))
        config = TrainingConfig.from_file(path)
        assert config.learning_rate == 0.001 and config.epochs == 3

    def test_from_toml_file(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("learning_rate = 0.002\nepochs = 7\n")
        config = TrainingConfig.from_file(path)
        assert config.learning_rate == 0.002 and config.epochs == 7


class TestSwapVocabulary:
    def test_embedding_shape_and_rows(self):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=20, n_sentences=10)
        assert adapted.model.token_embedding.weight.shape == (len(table), 64)
        for pid in (1, 7, 20):
            row = adapted.model.token_embedding.weight[table.index_of(str(pid))]
            assert np.allclose(row.detach().numpy(), matrix.vectors[pid], atol=1e-7)

    def test_reserved_rows_from_base(self):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=8, n_sentences=5)
        for token in RESERVED_TOKENS:
            row = adapted.model.token_embedding.weight[table.index_of(token)]
            assert np.allclose(row.detach().numpy(), base.special_embedding(token), atol=1e-7)

    def test_oov_rows_from_caption_embedding(self):
        vocab = toy_vocabulary(5)
        corpus = [PictoSentence(tokens=(picto(1), oov("xyzzy")), source_text="x")]
        base = TinyTextBackend(seed=1)
        from pictopred.embeddings import build_embedding_matrix

        matrix, _ = build_embedding_matrix(vocab, "caption", base)
        table = build_token_table(corpus, vocab)
        adapted = swap_vocabulary(base, table, matrix)
        row = adapted.model.token_embedding.weight[table.index_of("xyzzy")]
        assert np.allclose(
            row.detach().numpy(), caption_embedding(base, "xyzzy").astype(np.float32), atol=1e-7
        )

    def test_trunk_preserved_bit_exact(self):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=8, n_sentences=5)
        base_state = base.model.state_dict()
        new_state = adapted.model.state_dict()
        for key, value in base_state.items():
            if key in ("token_embedding.weight", "output_bias"):
                continue
            assert torch.equal(value, new_state[key]), key

    def test_missing_row_named(self):
        vocab = toy_vocabulary(3)
        base = TinyTextBackend(seed=0)
        matrix = EmbeddingMatrix(
            vectors={1: np.zeros(64, dtype=np.float32), 2: np.zeros(64, dtype=np.float32)},
            strategy="caption", h=64, encoder_id=base.encoder_id,
        )
        table = build_token_table([], vocab)
        with pytest.raises(MissingRowError, match="3"):
            swap_vocabulary(base, table, matrix)

    def test_dimension_mismatch(self):
        vocab = toy_vocabulary(2)
        base = TinyTextBackend(seed=0)
        matrix = EmbeddingMatrix(
            vectors={1: np.zeros(32, dtype=np.float32), 2: np.zeros(32, dtype=np.float32)},
            strategy="caption", h=32, encoder_id="other",
        )
        with pytest.raises(DimensionMismatchError):
            swap_vocabulary(base, build_token_table([], vocab), matrix)

    def test_swap_is_deterministic(self):
        vocab, corpus, base, matrix, table, _ = tiny_pipeline(vocab_size=8, n_sentences=5)
        a = swap_vocabulary(base, table, matrix, rng_seed=3)
        b = swap_vocabulary(base, table, matrix, rng_seed=3)
        for key, value in a.model.state_dict().items():
            assert torch.equal(value, b.model.state_dict()[key]), key

    def test_output_bias_zeroed(self):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=8, n_sentences=5)
        assert torch.all(adapted.model.output_bias == 0)


class TestEncodeSentences:
    def test_layout(self):
        table = TokenTable(RESERVED_TOKENS + ("1", "2"))
        ids = encode_sentences(table, [["1", "2"]], sequence_length=6)
        assert ids.tolist() == [[CLS_INDEX, NUM_RESERVED, NUM_RESERVED + 1, SEP_INDEX,
                                 PAD_INDEX, PAD_INDEX]]

    def test_unknown_maps_to_unk(self):
        table = TokenTable(RESERVED_TOKENS + ("1",))
        ids = encode_sentences(table, [["1", "mystery"]], sequence_length=5)
        assert ids[0, 2].item() == 1  # UNK index

    def test_strict_mode_raises(self):
        table = TokenTable(RESERVED_TOKENS + ("1",))
        with pytest.raises(UnknownTokenError):
            encode_sentences(table, [["mystery"]], sequence_length=5, strict=True)

    def test_too_long_rejected(self):
        table = TokenTable(RESERVED_TOKENS + ("1",))
        with pytest.raises(ValueError):
            encode_sentences(table, [["1"] * 12], sequence_length=13)


class TestMaskCollate:
    def _table(self, size=105):
        return TokenTable(RESERVED_TOKENS + tuple(str(i) for i in range(1, size - 4)))

    def test_twenty_maskable_selects_exactly_three(self):
        table = self._table()
        config = TrainingConfig(sequence_length=22, epochs=1)
        row = torch.tensor([[CLS_INDEX] + [NUM_RESERVED + i for i in range(20)] + [SEP_INDEX]])
        batch = mask_collate(row, config, np.random.default_rng(0), table)
        assert int(batch.selection_mask.sum()) == 3

    def test_padding_only_sequence_raises(self):
        table = self._table()
        config = TrainingConfig(epochs=1)
        row = torch.full((1, 13), PAD_INDEX)
        with pytest.raises(NoMaskablePositionsError):
            mask_collate(row, config, np.random.default_rng(0), table)

    def test_reserved_positions_never_selected(self):
        table = self._table()
        config = TrainingConfig(epochs=1)
        rows = encode_sentences(table, [["1", "2", "3"]] * 50, sequence_length=13)
        batch = mask_collate(rows, config, np.random.default_rng(1), table)
        assert not batch.selection_mask[rows < NUM_RESERVED].any()
        # Labels exactly where selected.
        assert torch.equal(batch.labels != IGNORE_INDEX, batch.selection_mask)

    def test_min_one_position_selected(self):
        table = self._table()
        config = TrainingConfig(epochs=1)
        rows = encode_sentences(table, [["1"]], sequence_length=13)
        batch = mask_collate(rows, config, np.random.default_rng(2), table)
        assert int(batch.selection_mask.sum()) == 1

    def test_corruption_statistics(self):
        table = self._table()
        config = TrainingConfig(sequence_length=22, epochs=1)
        rows = torch.tensor(
            [[CLS_INDEX] + [NUM_RESERVED + (i % 90) for i in range(20)] + [SEP_INDEX]]
        ).repeat(800, 1)
        batch = mask_collate(rows, config, np.random.default_rng(3), table)
        selected = batch.selection_mask
        total = int(selected.sum())
        assert total == 800 * 3
        masked = int((batch.input_ids[selected] == MASK_INDEX).sum())
        unchanged = int((batch.input_ids[selected] == rows[selected]).sum())
        randomized = total - masked - unchanged
        assert abs(masked / total - 0.8) < 0.03
        assert abs(randomized / total - 0.1) < 0.03
        assert abs(unchanged / total - 0.1) < 0.03
        # Random replacements stay off the reserved range.
        assert (batch.input_ids[selected] >= NUM_RESERVED).sum() + masked == total

    def test_reproducible_under_seed(self):
        table = self._table()
        config = TrainingConfig(epochs=1)
        rows = encode_sentences(table, [["1", "2", "3", "4", "5"]] * 20, sequence_length=13)
        a = mask_collate(rows, config, np.random.default_rng(9), table)
        b = mask_collate(rows, config, np.random.default_rng(9), table)
        assert torch.equal(a.input_ids, b.input_ids)
        assert torch.equal(a.labels, b.labels)


class TestLossAndOptimizer:
    def test_certainty_logits_give_zero_loss(self):
        logits = torch.full((1, 3, 7), -1000.0)
        labels = torch.tensor([[2, IGNORE_INDEX, 5]])
        logits[0, 0, 2] = 1000.0
        logits[0, 2, 5] = 1000.0
        assert float(masked_cross_entropy(logits, labels)) == 0.0

    def test_zero_learning_rate_step_is_noop(self):
        model = MaskedEncoder(12, EncoderConfig(hidden_size=16, num_heads=2))
        before = {k: v.clone() for k, v in model.state_dict().items()}
        optimizer = torch.optim.AdamW(model.parameters(), lr=0.0, weight_decay=0.01)
        ids = torch.tensor([[CLS_INDEX, 6, 7, SEP_INDEX]])
        labels = torch.tensor([[IGNORE_INDEX, 7, IGNORE_INDEX, IGNORE_INDEX]])
        loss = masked_cross_entropy(model(ids), labels)
        loss.backward()
        optimizer.step()
        after = model.state_dict()
        for key in before:
            assert torch.equal(before[key], after[key]), key


class TestFinetune:
    def _setup(self, n_sentences=80, vocab_size=40, seed=0):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(
            vocab_size=vocab_size, n_sentences=n_sentences, seed=seed
        )
        tokenized = [s.token_strings() for s in corpus]
        return adapted, tokenized[: n_sentences - 20], tokenized[n_sentences - 20:]

    def test_loss_decreases_on_fixture(self):
        adapted, train, val = self._setup()
        config = TrainingConfig(
            learning_rate=1e-3, batch_sequences=16, epochs=8, rng_seed=0
        )
        result = finetune(adapted, train, val, config)
        assert len(result.train_losses) == 8
        assert result.train_losses[-1] < result.train_losses[0]

    def test_fixed_seed_identical_history(self):
        config = TrainingConfig(learning_rate=1e-3, batch_sequences=16, epochs=3, rng_seed=5)
        adapted_a, train, val = self._setup(seed=2)
        result_a = finetune(adapted_a, train, val, config)
        adapted_b, train_b, val_b = self._setup(seed=2)
        result_b = finetune(adapted_b, train_b, val_b, config)
        assert result_a.train_losses == result_b.train_losses
        assert result_a.val_losses == result_b.val_losses

    def test_gradient_accumulation_matches_batch_sizes(self):
        # Effective batch is what the config specifies; micro-batching only
        # changes how it is traversed.
        config = TrainingConfig(learning_rate=1e-3, batch_sequences=16, epochs=2,
                                rng_seed=1, micro_batch=4)
        adapted, train, val = self._setup(seed=3)
        result = finetune(adapted, train, val, config)
        assert len(result.train_losses) == 2

    def test_empty_split_rejected(self):
        adapted, train, val = self._setup()
        config = TrainingConfig(epochs=1)
        with pytest.raises(ValueError):
            finetune(adapted, [], val, config)

    def test_checkpoint_interval_writes(self, tmp_path):
        adapted, train, val = self._setup(n_sentences=40, vocab_size=20)
        config = TrainingConfig(learning_rate=1e-3, batch_sequences=16, epochs=2,
                                rng_seed=0, checkpoint_interval=1)
        finetune(adapted, train, val, config, checkpoint_dir=tmp_path)
        assert (tmp_path / "epoch-0001" / "manifest.json").exists()
        assert (tmp_path / "epoch-0002" / "weights.pt").exists()

    def test_non_finite_loss_detected(self):
        from pictopred.errors import DivergenceDetectedError

        adapted, train, val = self._setup(n_sentences=40, vocab_size=20)
        with torch.no_grad():
            adapted.model.head_dense.weight.fill_(float("inf"))
        config = TrainingConfig(learning_rate=1e-3, batch_sequences=16, epochs=1, rng_seed=0)
        with pytest.raises(DivergenceDetectedError):
            finetune(adapted, train, val, config)


class TestCheckpoint:
    def _probe_scores(self, adapted):
        ids = encode_sentences(adapted.table, [["1", "2", "3"]], sequence_length=13)
        with torch.no_grad():
            return adapted.model(ids, attention_mask=ids != PAD_INDEX)

    def test_round_trip_identical_scores(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        save_checkpoint(adapted, tmp_path / "ckpt", epoch=0)
        restored = load_checkpoint(tmp_path / "ckpt")
        assert restored.table == adapted.table
        assert restored.strategy == adapted.strategy
        diff = (self._probe_scores(adapted) - self._probe_scores(restored)).abs().max()
        assert float(diff) <= 1e-6

    def test_corrupted_weights_rejected(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        save_checkpoint(adapted, tmp_path / "ckpt")
        (tmp_path / "ckpt" / "weights.pt").write_bytes(b"garbage")
        with pytest.raises(CheckpointIOError):
            load_checkpoint(tmp_path / "ckpt")

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(CheckpointIOError):
            load_checkpoint(tmp_path / "missing")

    def test_vocab_mismatch_rejected(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        save_checkpoint(adapted, tmp_path / "ckpt")
        other_vocab = toy_vocabulary(11)
        with pytest.raises(VersionMismatchError):
            load_checkpoint(tmp_path / "ckpt", vocab=other_vocab)

    def test_matching_vocab_accepted(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        save_checkpoint(adapted, tmp_path / "ckpt")
        load_checkpoint(tmp_path / "ckpt", vocab=vocab)

    def test_tampered_table_rejected(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        save_checkpoint(adapted, tmp_path / "ckpt")
        table_path = tmp_path / "ckpt" / "token_table.json"
        data = json.loads(table_path.read_text())
        data["tokens"][-1] = "tampered"
        table_path.write_text(json.dumps(data))
        with pytest.raises(VersionMismatchError):
            load_checkpoint(tmp_path / "ckpt")

    def test_unwritable_path_rejected(self, tmp_path):
        vocab, corpus, base, matrix, table, adapted = tiny_pipeline(vocab_size=10, n_sentences=6)
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        with pytest.raises(CheckpointIOError):
            save_checkpoint(adapted, blocker / "ckpt")
