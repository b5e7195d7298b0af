"""Full-scale base encoder over a pretrained masked LM.

This is the seam for running the recipe at its intended scale (a
BERTimbau-sized encoder on GPU). It mirrors ``TinyTextBackend``'s surface
so ``swap_vocabulary`` and ``finetune`` work unchanged, but it materializes
the trunk by copying pretrained weights into the toolkit's
``MaskedEncoder`` layout. It requires the pretrained weights to be
available locally or downloadable and is exercised only by the optional
full-scale job, never by the desk-scale test suite.
"""

from __future__ import annotations

import numpy as np
import torch

from .encoders import HFTextEncoder, Subtoken
from .training import EncoderConfig, MaskedEncoder, NUM_RESERVED, RESERVED_TOKENS


def hf_sentence_ppl_scorer(model_name: str, device: str = "cpu"):
    """Sentence pseudo-perplexity scorer over a pretrained masked LM,
    for the corpus-cleaning quartile filter.

    Feeds the sentence unmasked with labels equal to the input and
    exponentiates the mean cross-entropy over content positions.
    """
    import torch
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModelForMaskedLM.from_pretrained(model_name)
    model.eval().to(device)
    special = set(tokenizer.all_special_ids)

    def score(text: str) -> float:
        enc = tokenizer(text, return_tensors="pt").to(device)
        ids = enc["input_ids"][0]
        with torch.no_grad():
            logits = model(**enc).logits[0]
        log_probs = torch.log_softmax(logits, dim=-1)
        positions = [i for i, t in enumerate(ids.tolist()) if t not in special]
        gold_log_probs = log_probs[positions, ids[positions]]
        return float(torch.exp(-gold_log_probs.mean()))

    return score


class HFBaseBackend:
    """Base-model surface (EncoderHandle + special embeddings + trunk) over
    a pretrained BERT-family checkpoint."""

    def __init__(self, model_name: str = "neuralmind/bert-base-portuguese-cased"):
        self.text_encoder = HFTextEncoder(model_name)
        hf_config = self.text_encoder.model.config
        self.config = EncoderConfig(
            hidden_size=hf_config.hidden_size,
            num_layers=hf_config.num_hidden_layers,
            num_heads=hf_config.num_attention_heads,
            ffn_size=hf_config.intermediate_size,
            max_positions=13,
        )
        self.hidden_size = self.config.hidden_size
        self.encoder_id = self.text_encoder.encoder_id
        self.model = self._build_trunk()

    # EncoderHandle delegation
    def subtokenize(self, text: str) -> list[Subtoken]:
        return self.text_encoder.subtokenize(text)

    def input_embedding(self, subtoken_id: int) -> np.ndarray:
        return self.text_encoder.input_embedding(subtoken_id)

    def encode(self, text: str) -> np.ndarray:
        return self.text_encoder.encode(text)

    def special_embedding(self, token: str) -> np.ndarray:
        tokenizer = self.text_encoder.tokenizer
        names = {
            "[PAD]": tokenizer.pad_token_id,
            "[UNK]": tokenizer.unk_token_id,
            "[CLS]": tokenizer.cls_token_id,
            "[SEP]": tokenizer.sep_token_id,
            "[MASK]": tokenizer.mask_token_id,
        }
        if token not in RESERVED_TOKENS or names.get(token) is None:
            raise ValueError(f"no special embedding for {token!r}")
        return self.input_embedding(names[token])

    def _build_trunk(self) -> MaskedEncoder:
        """Copy pretrained transformer weights into the MaskedEncoder layout."""
        source = self.text_encoder.model
        model = MaskedEncoder(NUM_RESERVED, self.config)
        with torch.no_grad():
            model.position_embedding.weight.copy_(
                source.embeddings.position_embeddings.weight[: self.config.max_positions]
            )
            model.input_norm.weight.copy_(source.embeddings.LayerNorm.weight)
            model.input_norm.bias.copy_(source.embeddings.LayerNorm.bias)
            for dst, src in zip(model.layers, source.encoder.layer):
                attn = src.attention
                qkv_weight = torch.cat(
                    [attn.self.query.weight, attn.self.key.weight, attn.self.value.weight]
                )
                qkv_bias = torch.cat(
                    [attn.self.query.bias, attn.self.key.bias, attn.self.value.bias]
                )
                dst.self_attn.in_proj_weight.copy_(qkv_weight)
                dst.self_attn.in_proj_bias.copy_(qkv_bias)
                dst.self_attn.out_proj.weight.copy_(attn.output.dense.weight)
                dst.self_attn.out_proj.bias.copy_(attn.output.dense.bias)
                dst.norm1.weight.copy_(attn.output.LayerNorm.weight)
                dst.norm1.bias.copy_(attn.output.LayerNorm.bias)
                dst.linear1.weight.copy_(src.intermediate.dense.weight)
                dst.linear1.bias.copy_(src.intermediate.dense.bias)
                dst.linear2.weight.copy_(src.output.dense.weight)
                dst.linear2.bias.copy_(src.output.dense.bias)
                dst.norm2.weight.copy_(src.output.LayerNorm.weight)
                dst.norm2.bias.copy_(src.output.LayerNorm.bias)
        model.eval()
        return model
