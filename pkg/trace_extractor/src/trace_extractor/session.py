"""Model session protocol and a deterministic toy implementation.

A session is anything that exposes the hooks the extractor needs: layer
counts, vision-tower geometry, per-layer patch embeddings, per-layer token
embeddings, and (optionally) attention rows over the patches. Real model
integrations implement this protocol; the bundled toy session generates a
deterministic reasoning-token stream so captures are reproducible offline.
"""

from __future__ import annotations

import zlib
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ExtractionError


@runtime_checkable
class ModelSession(Protocol):
    model_id: str

    @property
    def num_layers(self) -> int: ...

    @property
    def supports_attention(self) -> bool: ...

    def vision_config(self) -> dict:
        """Return image_w/image_h/patch_w/patch_h as the model declares them."""

    def patch_count(self) -> int:
        """Number of visual-assistant patch tokens the vision tower emits."""

    def patch_embeddings(self, layer: int) -> np.ndarray:
        """(L_v, d) patch embeddings at the given layer index."""

    def generate_step(self) -> list[str] | None:
        """Next burst of thinking tokens, or None when generation ends."""

    def token_embeddings(self, tokens: list[str], layer: int) -> np.ndarray:
        """(len(tokens), d) embeddings for the given window at a layer."""

    def attention_rows(self, tokens: list[str], layer: int) -> np.ndarray:
        """(len(tokens), L_v) attention of the window over the patches."""


_WORDS = (
    "the", "angle", "segment", "ratio", "between", "marked", "values",
    "appears", "larger", "than", "expected", "so", "compare", "both",
    "axes", "carefully", "against", "grid", "lines", "now",
)
_OPENERS = ("Wait,", "Hmm,", "So", "Next", "Then", "Indeed.", "Right.")


def _stable_seed(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    return zlib.crc32(text.encode("utf-8"))


class ToyMultimodalSession:
    """Deterministic stand-in for a hosted multimodal model.

    Hidden states are quantized to multiples of 1/64 so capture output is
    platform-stable. The grid geometry comes from the constructor config,
    mirroring how a real integration would read the vision tower's
    patchification settings.
    """

    def __init__(self, model_id: str, prompt: str, *, seed: int = 0,
                 image_w: int = 32, image_h: int = 32,
                 patch_w: int = 8, patch_h: int = 8,
                 layers: int = 6, dim: int = 8, max_steps: int = 64,
                 with_attention: bool = True):
        if layers < 1 or dim < 1:
            raise ExtractionError("toy model needs at least one layer and dim")
        self.model_id = model_id
        self.prompt = prompt
        self._layers = layers
        self._dim = dim
        self._max_steps = max_steps
        self._with_attention = with_attention
        self._vision = {"image_w": image_w, "image_h": image_h,
                        "patch_w": patch_w, "patch_h": patch_h}
        rows = -(-image_h // patch_h)
        cols = -(-image_w // patch_w)
        self._patch_count = rows * cols
        rng = np.random.default_rng(_stable_seed("patches", model_id, seed))
        self._patches = [
            rng.integers(16, 65, size=(self._patch_count, dim)) / 64.0
            for _ in range(layers)
        ]
        self._text_rng = np.random.default_rng(_stable_seed(prompt, seed))
        self._steps_done = 0

    @property
    def num_layers(self) -> int:
        return self._layers

    @property
    def supports_attention(self) -> bool:
        return self._with_attention

    def vision_config(self) -> dict:
        return dict(self._vision)

    def patch_count(self) -> int:
        return self._patch_count

    def patch_embeddings(self, layer: int) -> np.ndarray:
        return self._patches[layer]

    def generate_step(self) -> list[str] | None:
        if self._steps_done >= self._max_steps:
            return None
        self._steps_done += 1
        rng = self._text_rng
        tokens = []
        if rng.random() < 0.4:
            tokens.append(str(rng.choice(_OPENERS)))
        length = int(rng.integers(1, 8))
        tokens.extend(str(w) for w in rng.choice(_WORDS, size=length))
        closer = rng.choice([".", ".", ".", "?", "!"])
        tokens[-1] = tokens[-1] + str(closer) if rng.random() < 0.7 else tokens[-1]
        return tokens

    def _token_vector(self, token: str, layer: int) -> np.ndarray:
        rng = np.random.default_rng(_stable_seed("token", token, layer))
        return rng.integers(16, 65, size=self._dim) / 64.0

    def token_embeddings(self, tokens: list[str], layer: int) -> np.ndarray:
        if not tokens:
            raise ExtractionError("empty token window")
        return np.stack([self._token_vector(t, layer) for t in tokens])

    def attention_rows(self, tokens: list[str], layer: int) -> np.ndarray:
        if not self._with_attention:
            raise ExtractionError("model exposes no attention hooks")
        thinking = self.token_embeddings(tokens, layer)
        return thinking @ self._patches[layer].T
