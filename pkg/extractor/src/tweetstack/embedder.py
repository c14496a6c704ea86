"""Slice embedding backends.

The real backend runs a pretrained financial language model and returns its
768-dim sentence (CLS) vectors; it needs local weights and is optional. The
hash backend derives a deterministic pseudo-embedding from the slice text so
the rest of the pipeline can run and be tested without model weights.
"""

from __future__ import annotations

import hashlib
import warnings

import numpy as np

from .errors import ModelUnavailableError

EMBED_DIM = 768


class HashEmbedder:
    """Deterministic text-hash embeddings; identical slices map to identical rows."""

    name = "hash"

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed(self, slices: list[str]) -> np.ndarray:
        out = np.empty((len(slices), self.dim), dtype=np.float32)
        for i, text in enumerate(slices):
            digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out[i] = rng.standard_normal(self.dim).astype(np.float32)
        return out


class TransformerEmbedder:
    """CLS-vector embeddings from a pretrained financial language model."""

    name = "finbert"

    def __init__(self, model_name: str = "ProsusAI/finbert", batch_size: int = 16):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelUnavailableError(
                f"transformers/torch not installed: {exc}"
            ) from None
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModel.from_pretrained(model_name)
        except Exception as exc:  # weights missing, no network, etc.
            raise ModelUnavailableError(f"cannot load {model_name}: {exc}") from None
        self._torch = torch
        self._model.eval()
        self.batch_size = batch_size
        self.dim = int(self._model.config.hidden_size)

    def embed(self, slices: list[str]) -> np.ndarray:
        torch = self._torch
        rows = []
        limit = self._tokenizer.model_max_length
        with torch.no_grad():
            for start in range(0, len(slices), self.batch_size):
                batch = slices[start : start + self.batch_size]
                over = [
                    i for i, s in enumerate(batch)
                    if len(self._tokenizer.tokenize(s)) > limit
                ]
                if over:
                    warnings.warn(
                        f"{len(over)} slice(s) exceed the model token limit; truncated",
                        stacklevel=2,
                    )
                enc = self._tokenizer(
                    batch, return_tensors="pt", padding=True,
                    truncation=True, max_length=limit,
                )
                hidden = self._model(**enc).last_hidden_state
                rows.append(hidden[:, 0, :].cpu().numpy().astype(np.float32))
        return np.vstack(rows) if rows else np.empty((0, self.dim), dtype=np.float32)


def make_embedder(backend: str):
    if backend == "hash":
        return HashEmbedder()
    if backend == "finbert":
        return TransformerEmbedder()
    raise ValueError(f"unknown embedding backend {backend!r}")
