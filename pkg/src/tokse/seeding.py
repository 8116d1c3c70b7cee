"""Deterministic seed derivation so every stage gets an independent stream."""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Hash a path of labels/indices down to a 64-bit seed.

    Children derived with distinct part tuples get independent streams, and
    the mapping is stable across runs and platforms.
    """
    key = "/".join(str(p) for p in parts)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
