"""Seeded random substreams.

Every run derives independent generators from one integer seed, keyed by
role: ("env",) for the environment and ("player", j) for player j. The
keyed split means adding or removing a player never shifts the draws of
the others.
"""
from __future__ import annotations

import numpy as np

_ROLE_CODES = {"env": 0, "player": 1, "aux": 2}


def substream(seed: int, role: str, *index: int) -> np.random.Generator:
    key = (_ROLE_CODES[role],) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


class UniformStream:
    """Buffered U[0,1) draws that can be consumed one at a time or in runs.

    The sequence of values does not depend on how reads are grouped, which
    lets a player consume a long stretch in one call or round by round and
    see exactly the same numbers.
    """

    def __init__(self, gen: np.random.Generator, chunk: int = 4096):
        self._gen = gen
        self._chunk = chunk
        self._buf = gen.random(chunk)
        self._pos = 0

    def _ensure(self, n: int) -> None:
        if self._pos + n > self._buf.size:
            fresh = self._gen.random(max(self._chunk, n))
            self._buf = np.concatenate((self._buf[self._pos:], fresh))
            self._pos = 0

    def random(self) -> float:
        if self._pos >= self._buf.size:
            self._ensure(1)
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.random() * n)

    def peek(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._buf[self._pos:self._pos + n]

    def peek_ints(self, n: int, high: int) -> np.ndarray:
        return (self.peek(n) * high).astype(np.int64)

    def advance(self, n: int) -> None:
        self._ensure(n)
        self._pos += n

    def first_below(self, p: float, limit: int) -> int:
        """Offset of the next draw below `p`, or `limit` if none within it."""
        if limit <= 0:
            return 0
        hits = np.flatnonzero(self.peek(limit) < p)
        return int(hits[0]) if hits.size else limit
