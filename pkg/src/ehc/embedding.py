"""Text embeddings and cosine similarity.

The reference embedder is a signed hashed bag of tokens: each lowercase
alphanumeric token is hashed with 64-bit FNV-1a, the hash picks a bucket
(``hash % dim``) and a sign (bit 63), and the accumulated vector is
L2-normalized. Empty or token-free text maps to the zero vector.

All arithmetic uses index-ascending accumulation so that similarities are
bit-reproducible and ``cosine_sim(a, b) == cosine_sim(b, a)`` exactly.
"""

from __future__ import annotations

import math
import re
from typing import Protocol, Sequence

from ehc.errors import UsageError

DEFAULT_DIM = 256

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Unicode letters and digits; underscore counts as a separator.
_TOKEN_RE = re.compile(r"[^\W_]+")

EmbeddingVector = tuple[float, ...]


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def l2_normalize(values: Sequence[float]) -> EmbeddingVector:
    sq = 0.0
    for v in values:
        sq += v * v
    if sq == 0.0:
        return tuple(0.0 for _ in values)
    norm = math.sqrt(sq)
    return tuple(v / norm for v in values)


class HashEmbedder:
    """Deterministic, dependency-free reference embedder."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise UsageError(f"embedding dim must be positive, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        acc = [0.0] * self.dim
        for token in tokenize(text):
            h = fnv1a_64(token.encode("utf-8"))
            sign = -1.0 if h >> 63 else 1.0
            acc[h % self.dim] += sign
        return l2_normalize(acc)

    def __repr__(self) -> str:
        return f"HashEmbedder(dim={self.dim})"


_default = HashEmbedder()


def embed(text: str) -> EmbeddingVector:
    """Embed with the default reference embedder (dim 256)."""
    return _default.embed(text)


def cosine_sim(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise UsageError(f"dimension mismatch: {len(a)} vs {len(b)}")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 0.0
    sim = dot / (math.sqrt(na) * math.sqrt(nb))
    # rounding can push |sim| a hair past 1
    if sim > 1.0:
        return 1.0
    if sim < -1.0:
        return -1.0
    return sim


def make_embedder(kind: str = "reference", dim: int = DEFAULT_DIM, **http_options) -> Embedder:
    """Build the embedder named by the ``embedder`` config key."""
    if kind == "reference":
        return HashEmbedder(dim)
    if kind == "external":
        from ehc.llm import HttpEmbedder

        return HttpEmbedder(dim=dim, **http_options)
    raise UsageError(f"unknown embedder {kind!r} (expected 'reference' or 'external')")
