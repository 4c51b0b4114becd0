"""Stable derivation of independent random streams from one master seed."""

import hashlib

import numpy as np


def derive_seed(master_seed: int, tag: str) -> int:
    """Hash ``(master_seed, tag)`` into a 64-bit seed.

    The same pair always yields the same seed on every platform, and distinct
    tags give statistically independent streams.
    """
    digest = hashlib.sha256(f"{int(master_seed)}/{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(master_seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, tag))
