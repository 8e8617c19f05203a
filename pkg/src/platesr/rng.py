"""Deterministic random streams.

Every stochastic stage draws from a Philox counter-based generator keyed by
(seed, *tokens). Tokens are usually record ids, so per-record streams are
independent of processing order and thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *tokens: str | int) -> np.random.Generator:
    """Return a Generator keyed by seed and an ordered token tuple.

    String tokens are hashed (sha256) so arbitrary ids map to stable
    entropy words across platforms and runs.
    """
    words = [int(seed) & _MASK64]
    for tok in tokens:
        if isinstance(tok, (int, np.integer)):
            words.append(int(tok) & _MASK64)
        else:
            digest = hashlib.sha256(str(tok).encode("utf-8")).digest()
            words.extend(
                int.from_bytes(digest[i : i + 8], "little") for i in (0, 8, 16, 24)
            )
    seq = np.random.SeedSequence(words)
    return np.random.Generator(np.random.Philox(seq))
