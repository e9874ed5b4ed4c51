"""Deterministic random streams.

All randomness in the package flows through numpy's Philox bit generator
(counter-based, 4x64), keyed through SeedSequence with explicit integer
entropy words. Streams with different entropy tuples are independent, and a
given tuple reproduces bit-identically across runs, thread counts and
platforms.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def stream(*entropy: int) -> np.random.Generator:
    """Generator for the entropy words; negative seeds are taken mod 2**64."""
    words = [int(e) & _MASK for e in entropy]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
