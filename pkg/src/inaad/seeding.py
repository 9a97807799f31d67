"""Deterministic seed derivation.

All randomness in this package flows through numpy's Philox counter-based
bit generator, keyed by explicit integer seeds. Sub-seeds are derived with
``derive_seed`` so that independent pieces of work (one noise level, one
image, one training iteration) own independent, reproducible streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "make_rng", "stable_hash"]


def stable_hash(text: str) -> int:
    """Platform-stable 63-bit hash of a string (SHA-256 prefix)."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def derive_seed(*parts: int | str) -> int:
    """Derive a child seed from a tuple of integers and/or strings.

    The same parts always yield the same seed, on any platform. Strings are
    hashed with SHA-256 before entering the entropy pool.
    """
    if not parts:
        raise ValueError("derive_seed needs at least one part")
    entropy = [stable_hash(p) if isinstance(p, str) else int(p) for p in parts]
    seq = np.random.SeedSequence(entropy)
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for the given seed."""
    return np.random.Generator(np.random.Philox(key=seed))
