"""Deterministic 64-bit seed derivation.

Every random stream in the package is derived from a master seed with
``mix64``, a SplitMix64 finalizer over the seed advanced by golden-ratio
steps.  The function is the published mixing rule that makes trial-level
parallelism independent of scheduling: sub-seed i is ``mix64(master, i)``
no matter which thread runs trial i.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream tags for the per-session random streams.  Alice's measurement
# outcomes, Bob's local measurement noise, and the referee's ground truth
# are drawn from separate streams of the same session seed so that the two
# endpoints of a networked session can reproduce their own halves exactly.
STREAM_TRUTH = 0
STREAM_ALICE = 1
STREAM_BOB = 2
STREAM_SEESAW = 3
STREAM_ORACLE = 4


def mix64(seed: int, stream: int) -> int:
    """Mix a master seed and a stream index into an independent 64-bit seed.

    z = seed + (stream + 1) * 0x9E3779B97F4A7C15   (mod 2**64)
    z = (z ^ z>>30) * 0xBF58476D1CE4E5B9           (mod 2**64)
    z = (z ^ z>>27) * 0x94D049BB133111EB           (mod 2**64)
    return z ^ z>>31
    """
    z = (int(seed) + (int(stream) + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for one derived stream of a master seed."""
    return np.random.Generator(np.random.PCG64(mix64(seed, stream)))
