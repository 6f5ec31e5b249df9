"""Counter-based random number streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Experiments derive one Philox generator per (master seed, experiment id,
replica id, purpose tag) so that results are independent of scheduling
order and worker count: the key is a hash of the tags, not a shared
sequential state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(master_seed: int, *tags) -> str:
    """Canonical string identifying a stream; stored in result records."""
    return "/".join([f"seed={int(master_seed)}"] + [str(t) for t in tags])


def stream(master_seed: int, *tags) -> np.random.Generator:
    """Philox generator keyed by a hash of (master seed, tags)."""
    digest = hashlib.sha256(stream_key(master_seed, *tags).encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
