"""Sentence encoders behind a tiny common interface.

Two families are supported, selected by the encoder identifier:

- ``hash:<dim>`` — a deterministic offline feature-hashing encoder (the
  documented default). Tokens are hashed with SHA-256 into ``dim`` signed
  buckets, so the same text always produces the same vector with no model
  download or weights involved.
- any other identifier — treated as a sentence-transformers model id and
  loaded locally; raises EncoderLoadFailure when the library or the model
  weights are not available.

Encoders expose ``dim``, ``max_tokens`` and ``encode_batch(texts)``; texts
longer than ``max_tokens`` tokens must be head-truncated by the caller.
"""

import hashlib
import re

import numpy as np

from embed_export.errors import EncoderLoadFailure

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_HASH_MAX_TOKENS = 256


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; empty text yields a single sentinel
    token so every input maps to a nonzero vector."""
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens if tokens else [""]


class HashingEncoder:
    """Deterministic signed feature hashing over word tokens."""

    def __init__(self, dim: int):
        if dim < 1:
            raise EncoderLoadFailure(f"hashing encoder dim must be >= 1, got {dim}")
        self.dim = dim
        self.max_tokens = _HASH_MAX_TOKENS

    def encode_batch(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            for token in tokenize(text):
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                index = int.from_bytes(digest[:8], "big") % self.dim
                sign = 1.0 if digest[8] & 1 else -1.0
                out[row, index] += sign
            if not out[row].any():
                # Sign cancellation across repeated buckets is possible in
                # principle; fall back to a fixed nonzero component so the
                # output never contains a zero-norm row.
                out[row, 0] = 1.0
        return out


class SentenceTransformerEncoder:
    """Adapter around a locally available sentence-transformers model."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderLoadFailure(
                f"encoder {model_id!r} requires the sentence-transformers "
                "package (pip install embed-export[st])") from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderLoadFailure(
                f"could not load sentence-transformers model {model_id!r}: {exc}"
            ) from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.max_tokens = int(getattr(self._model, "max_seq_length", 256))

    def encode_batch(self, texts: list[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(texts, convert_to_numpy=True,
                               normalize_embeddings=False, show_progress_bar=False),
            dtype=float)


def make_encoder(identifier: str):
    """Build an encoder from its identifier; see the module docstring."""
    if identifier.startswith("hash:"):
        suffix = identifier[len("hash:"):]
        try:
            dim = int(suffix)
        except ValueError:
            raise EncoderLoadFailure(
                f"bad hashing encoder id {identifier!r}: expected hash:<dim>")
        return HashingEncoder(dim)
    return SentenceTransformerEncoder(identifier)
