"""Counter-based random streams.

Every consumer derives an independent Philox stream from a 64-bit user
seed plus a tuple of purpose tags (strings or integers), so results do
not depend on scheduling or on how work is batched.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, *tags) -> np.random.Generator:
    """Independent generator keyed by hash(seed, *tags)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for tag in tags:
        if isinstance(tag, str):
            h.update(b"s" + tag.encode())
        else:
            h.update(b"i" + int(tag).to_bytes(8, "little", signed=True))
    key = np.frombuffer(h.digest(), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
