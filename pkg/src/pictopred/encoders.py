"""Text and image encoder backends.

Every consumer in the toolkit talks to encoders through two small
protocols so that the pretrained masked-language encoder, the desk-scale
trainable encoder, and test stubs are interchangeable.

Position convention for ``encode``: the returned array has shape
``(layers, positions, h)`` where position 0 is the sentence-start marker
and position ``1 + j`` holds subtoken ``j`` of ``subtokenize(text)``.
Implementations may append trailing positions (an end marker); callers
must not assume anything beyond ``1 + len(subtokens)`` positions exist.
"""

from __future__ import annotations

from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np

from .errors import EncoderFailureError


class Subtoken(NamedTuple):
    """A subtoken id plus the character span it covers in the input."""

    id: int
    start: int
    end: int


@runtime_checkable
class EncoderHandle(Protocol):
    """Masked-language text encoder surface used across the toolkit."""

    encoder_id: str
    hidden_size: int

    def subtokenize(self, text: str) -> list[Subtoken]: ...

    def input_embedding(self, subtoken_id: int) -> np.ndarray: ...

    def encode(self, text: str) -> np.ndarray:
        """Per-layer hidden states, shape (layers, positions, h), layers >= 4."""
        ...


@runtime_checkable
class ImageEncoderHandle(Protocol):
    """Image encoder surface (e.g. a vision transformer)."""

    encoder_id: str
    d_img: int

    def encode_image(self, image_bytes: bytes) -> np.ndarray: ...


def safe_encode(encoder: EncoderHandle, text: str) -> np.ndarray:
    """Encode, wrapping backend exceptions into EncoderFailureError."""
    try:
        states = np.asarray(encoder.encode(text))
    except Exception as exc:  # noqa: BLE001 - backend boundary
        raise EncoderFailureError(f"encoder {encoder.encoder_id!r} failed on {text!r}: {exc}") from exc
    if states.ndim != 3 or states.shape[0] < 4:
        raise EncoderFailureError(
            f"encoder {encoder.encoder_id!r} returned shape {states.shape}; "
            "need (layers >= 4, positions, h)"
        )
    return states


def marker_sum_last_layers(states: np.ndarray, n_layers: int = 4) -> np.ndarray:
    """Sum of the last ``n_layers`` layers at the sentence-start marker."""
    return states[-n_layers:, 0, :].sum(axis=0)


def marker_mean_last_layers(states: np.ndarray, n_layers: int = 4) -> np.ndarray:
    """Mean of the last ``n_layers`` layers at the sentence-start marker."""
    return states[-n_layers:, 0, :].mean(axis=0)


def sentence_embedding(encoder: EncoderHandle, text: str) -> np.ndarray:
    """Sentence vector for clustering: average of the last four layers'
    output at the sentence-start marker."""
    return marker_mean_last_layers(safe_encode(encoder, text))


class HFTextEncoder:
    """Pretrained masked-LM encoder via ``transformers`` (full-scale path).

    Requires the model weights to be available locally or downloadable;
    none of the desk-scale tests use this class.
    """

    def __init__(self, model_name: str, device: str = "cpu"):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name, output_hidden_states=True)
        self.model.eval().to(device)
        self.device = device
        self.encoder_id = f"hf:{model_name}"
        self.hidden_size = int(self.model.config.hidden_size)

    def subtokenize(self, text: str) -> list[Subtoken]:
        enc = self.tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        return [
            Subtoken(id=i, start=s, end=e)
            for i, (s, e) in zip(enc["input_ids"], enc["offset_mapping"])
        ]

    def input_embedding(self, subtoken_id: int) -> np.ndarray:
        weight = self.model.get_input_embeddings().weight
        return weight[subtoken_id].detach().cpu().numpy()

    def encode(self, text: str) -> np.ndarray:
        enc = self.tokenizer(text, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model(**enc)
        # hidden_states[0] is the embedding output; keep transformer layers only.
        layers = [h[0].cpu().numpy() for h in out.hidden_states[1:]]
        return np.stack(layers)


class HFImageEncoder:
    """Vision-transformer image encoder via ``transformers`` (full-scale path)."""

    def __init__(self, model_name: str = "google/vit-base-patch16-224", device: str = "cpu"):
        import io

        import torch
        from PIL import Image
        from transformers import AutoImageProcessor, AutoModel

        self._torch = torch
        self._Image = Image
        self._io = io
        self.processor = AutoImageProcessor.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval().to(device)
        self.device = device
        self.encoder_id = f"hf:{model_name}"
        self.d_img = int(self.model.config.hidden_size)

    def encode_image(self, image_bytes: bytes) -> np.ndarray:
        image = self._Image.open(self._io.BytesIO(image_bytes)).convert("RGBA")
        # Pictogram sources ship transparent backgrounds; composite on white.
        background = self._Image.new("RGBA", image.size, (255, 255, 255, 255))
        image = self._Image.alpha_composite(background, image).convert("RGB")
        inputs = self.processor(images=image, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model(**inputs)
        return out.last_hidden_state[0, 0].cpu().numpy()
