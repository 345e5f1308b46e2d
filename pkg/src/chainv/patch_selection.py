"""Salient-patch selection from per-step attention traces.

Attention here is the raw inner product between each recent thinking-token
embedding and each visual token embedding; no normalization or softmax is
applied at any point. Patches are ranked by the mean of that intensity over
the thinking tokens and the top k survive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, RangeError, SchemaError, ShapeError
from .trace_model import TraceRecord

DEFAULT_TOP_K = 3
MIN_TOP_K = 3


@dataclass(frozen=True, eq=False)
class AttentionProfile:
    """Per-token and mean attention over the visual patches of one step."""

    per_token: np.ndarray  # [n_thinking, n_patches]
    mean: np.ndarray       # [n_patches]

    @classmethod
    def from_per_token(cls, per_token: np.ndarray) -> "AttentionProfile":
        per_token = np.asarray(per_token, dtype=np.float64)
        if per_token.ndim != 2:
            raise ShapeError("per-token attention must be a 2-d matrix")
        return cls(per_token=per_token, mean=mean_attention(per_token))


@dataclass(frozen=True)
class Selection:
    """Indices of the selected patches, strongest first."""

    indices: tuple[int, ...]
    k: int

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(indices) != self.k:
            raise SchemaError("indices", "length must equal k")
        if len(set(indices)) != len(indices):
            raise SchemaError("indices", "duplicate patch index")
        if any(i < 0 for i in indices):
            raise SchemaError("indices", "negative patch index")
        object.__setattr__(self, "indices", indices)


def attention_intensity(thinking: np.ndarray, assistant: np.ndarray) -> np.ndarray:
    """Inner-product attention: ``out[i][j] = dot(thinking[i], assistant[j])``."""
    thinking = np.asarray(thinking, dtype=np.float64)
    assistant = np.asarray(assistant, dtype=np.float64)
    if thinking.ndim != 2 or assistant.ndim != 2:
        raise ShapeError("embedding matrices must be 2-d")
    if thinking.shape[0] < 1:
        raise ShapeError("need at least one thinking token")
    if thinking.shape[1] != assistant.shape[1]:
        raise ShapeError(
            f"embedding widths differ: {thinking.shape[1]} vs {assistant.shape[1]}")
    return thinking @ assistant.T


def mean_attention(per_token: np.ndarray) -> np.ndarray:
    """Column means of a per-token attention matrix."""
    per_token = np.asarray(per_token, dtype=np.float64)
    if per_token.ndim != 2:
        raise ShapeError("per-token attention must be a 2-d matrix")
    if per_token.shape[0] == 0:
        raise EmptyInputError("no thinking tokens to average")
    return per_token.mean(axis=0)


def top_k_patches(mean: np.ndarray, k: int) -> Selection:
    """Indices of the k largest mean-attention patches.

    Output is ordered by descending attention; equal values are broken by
    ascending patch index, so the result is a deterministic function of the
    input and invariant to any positive rescaling of it.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if mean.ndim != 1:
        raise ShapeError("mean attention must be a 1-d vector")
    if not MIN_TOP_K <= k <= mean.shape[0]:
        raise RangeError(
            f"k={k} outside [{MIN_TOP_K}, {mean.shape[0]}] for {mean.shape[0]} patches")
    # stable sort on the negated values keeps ascending-index order for ties
    order = np.argsort(-mean, kind="stable")[:k]
    return Selection(indices=tuple(int(i) for i in order), k=k)


def profile_for_record(record: TraceRecord) -> AttentionProfile:
    """Attention profile of a trace record, honoring its payload mode.

    Embedding payloads go through :func:`attention_intensity`; precomputed
    attention payloads are used verbatim.
    """
    if record.mode == "embeddings":
        per_token = attention_intensity(record.thinking_embeddings,
                                        record.assistant_embeddings)
    else:
        per_token = record.attention
    return AttentionProfile.from_per_token(per_token)
