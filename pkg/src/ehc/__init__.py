"""Two-tier agent memory with category-oriented experiential learning."""

from ehc.embedding import HashEmbedder, cosine_sim, embed
from ehc.errors import (
    BackendError,
    ConfigError,
    EHCError,
    FormatError,
    NotFoundError,
    ProtocolError,
    UsageError,
)
from ehc.memory import HierarchicalMemory, MemoryRecord, RetrievalResult

__all__ = [
    "BackendError",
    "ConfigError",
    "EHCError",
    "FormatError",
    "HashEmbedder",
    "HierarchicalMemory",
    "MemoryRecord",
    "NotFoundError",
    "ProtocolError",
    "RetrievalResult",
    "UsageError",
    "cosine_sim",
    "embed",
]

__version__ = "0.1.0"
