"""Counter-based random streams.

Every stochastic site (parameter init, dropout masks, shuffles, synthetic
data) draws from a Philox generator keyed by (seed, site, step). Streams
are independent of each other and of execution order, so runs are
bit-reproducible and adding a new site never shifts existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(seed: int, site: str, step: int = 0) -> int:
    """Collapse (seed, site, step) into one 64-bit stream key."""
    raw = f"{seed}\x1f{site}\x1f{step}".encode()
    return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "little")


def stream(seed: int, site: str, step: int = 0) -> np.random.Generator:
    """Independent generator for one stochastic site."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, site, step)))
