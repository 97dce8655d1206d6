"""Stable hashing helpers shared by backends, caches, and embedders.

Everything here must be deterministic across processes and platforms, so
all derived randomness goes through SHA-256 rather than Python's salted
``hash``.
"""

from __future__ import annotations

import hashlib

_SEP = "\x1f"


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def stable_u64(*parts: str) -> int:
    """64-bit integer keyed by the joined parts."""
    digest = hashlib.sha256(_SEP.join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def unit_uniform(*parts: str) -> float:
    """Deterministic draw in [0, 1) keyed by the joined parts."""
    return stable_u64(*parts) / 2.0**64
