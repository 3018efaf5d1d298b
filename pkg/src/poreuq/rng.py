"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream name, index)``: the Philox
generator is keyed from the seed and stream name and advanced straight to
the block that belongs to the requested index. Batches can therefore be
split across workers in any order without changing a single bit.
"""

from __future__ import annotations

import zlib

import numpy as np

_WORDS_PER_BLOCK = 4
_INV_2_53 = 2.0**-53


def stream_key(seed: int, stream: str) -> np.ndarray:
    """Philox key for a named stream of a master seed."""
    tag = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag,))
    return ss.generate_state(2, dtype=np.uint64)


def raw_block(seed: int, stream: str, start: int, n: int, width: int) -> np.ndarray:
    """Raw 64-bit words for rows ``start .. start+n-1``, ``width`` words per row.

    Each row occupies ``ceil(width / 4)`` Philox blocks, so row ``i`` always
    comes from the same counter range.
    """
    if n < 0 or start < 0:
        raise ValueError("start and n must be nonnegative")
    blocks = -(-width // _WORDS_PER_BLOCK)
    bg = np.random.Philox(key=stream_key(seed, stream))
    if start:
        bg.advance(start * blocks)
    raw = bg.random_raw(n * blocks * _WORDS_PER_BLOCK)
    return raw.reshape(n, blocks * _WORDS_PER_BLOCK)[:, :width]


def uniforms(seed: int, stream: str, n: int, width: int, start: int = 0) -> np.ndarray:
    """Uniforms on the open interval (0, 1), shape ``(n, width)``."""
    raw = raw_block(seed, stream, start, n, width)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def integers(seed: int, stream: str, n: int, high: int, start: int = 0) -> np.ndarray:
    """Integers in ``[0, high)``, one per row (Lemire-free modulo on 64 bits).

    The modulo bias is below ``high / 2**64`` and irrelevant for the index
    resampling it is used for.
    """
    raw = raw_block(seed, stream, start, n, 1)[:, 0]
    return (raw % np.uint64(high)).astype(np.int64)


def generator(seed: int, stream: str) -> np.random.Generator:
    """Sequential generator on a named stream (for permutations and the like)."""
    tag = zlib.crc32(stream.encode("utf-8"))
    seq = np.random.SeedSequence(int(seed), spawn_key=(tag,))
    return np.random.Generator(np.random.Philox(seq))
