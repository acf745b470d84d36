"""Deterministic seed derivation.

All randomness in a protocol session flows from one root seed through a
derivation tree: each party and each round gets its own child seed, computed
by hashing the root together with a path of labels.  The same tree is used
in-process and across the socket transport, which is what makes transcripts
byte-identical between the two modes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *path: object) -> int:
    """64-bit child seed for the given derivation path."""
    text = str(int(root)) + "".join(f"/{p}" for p in path)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derived_rng(root: int, *path: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *path))
