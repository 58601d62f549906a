"""Deterministic, splittable random streams.

Every random decision in the package flows from a counter-based Philox
generator keyed by (root seed, context strings/ints). Streams derived from
the same key are identical regardless of process, thread count, or the
order in which other streams were consumed, which is what makes worker
parallelism bit-reproducible.
"""

import hashlib

import numpy as np


def _key_int(part) -> int:
    """Map an arbitrary key part to a stable 64-bit integer."""
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    if isinstance(part, float):
        return _key_int(repr(part))
    raise TypeError(f"unsupported rng key part: {part!r}")


def derive_rng(root_seed: int, *parts) -> np.random.Generator:
    """Return a Generator uniquely determined by the root seed and key parts."""
    entropy = [_key_int(root_seed)] + [_key_int(p) for p in parts]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
