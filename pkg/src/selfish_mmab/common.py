"""Pieces shared by the full-sensing algorithms."""
from __future__ import annotations

import math

import numpy as np

from .numerics import round_half_up
from .sim import Phase, Plan, Player


def rr(t: int, rank: int, n: int) -> int:
    """Shifted round-robin slot: the 0-based form of t + j (mod n) + 1."""
    return (t + rank + 1) % n


def estimate_players(collision_rate: float, K: int) -> int:
    """1 + round(log(1 - rate) / log(1 - 1/K)), clamped to [1, K]."""
    if K == 1:
        return 1
    if collision_rate >= 1.0:
        return K
    m = 1 + round_half_up(math.log(1.0 - collision_rate) / math.log(1.0 - 1.0 / K))
    return min(max(m, 1), K)


def init_lengths(K: int, T: int) -> tuple[int, int]:
    """Rounds of uniform collision counting, then of musical chairs."""
    lt = math.log(T)
    return math.ceil(12 * math.e * K * K * lt), math.ceil(K * lt)


class FullSensingPlayer(Player):
    """Init protocol (player count estimate, then musical chairs) and helpers."""

    def __init__(self):
        super().__init__()
        self.m_hat = None
        self.rank = None

    def hold(self, arm: int, n: int):
        """Sit on `arm` for n rounds, ignoring feedback."""
        left = n
        while left > 0:
            blk = yield Plan(np.full(left, arm, dtype=np.int64), False)
            left -= blk.n

    def uniform_rounds(self, n: int, high: int):
        """n rounds of uniform pulls in [0, high); returns the collision count."""
        left = n
        hits = 0
        while left > 0:
            blk = yield Plan(self.rng.peek_ints(min(left, 1 << 14), high), False)
            self.rng.advance(blk.n)
            hits += int(np.count_nonzero(blk.eta == 1))
            left -= blk.n
        return hits

    def fallback(self):
        """Uniform play over all arms for the rest of the run."""
        self.set_phase(Phase.FALLBACK)
        self.log("no-rank")
        while True:
            yield from self.uniform_rounds(1 << 14, self.K)

    def choose_rank_arm(self, m_hat: int) -> int:
        return self.rng.integer(m_hat)

    def full_init(self):
        K, T = self.K, self.T
        n_est, n_mc = init_lengths(K, T)
        self.set_phase(Phase.INIT_ESTIMATE)
        coll = yield from self.uniform_rounds(n_est, K)
        self.m_hat = estimate_players(coll / n_est, K)
        self.log(f"m_hat:{self.m_hat}")
        self.set_phase(Phase.INIT_RANK)
        i = 0
        while i < n_mc and self.rank is None:
            a = self.choose_rank_arm(self.m_hat)
            fb = yield a
            i += 1
            if fb[1] == 0:
                self.rank = a
                self.log(f"rank:{a}")
        if self.rank is not None:
            yield from self.hold(self.rank, n_mc - i)


def rr_run(t: int, rank: int, n: int, K: int) -> np.ndarray:
    """rr over the n rounds starting at t."""
    return (t + np.arange(n) + rank + 1) % K


def play(arms):
    """Play a fixed arm sequence, ignoring collisions; return the eta array."""
    out = []
    pos = 0
    while pos < len(arms):
        blk = yield Plan(arms[pos:], False)
        out.append(blk.eta)
        pos += blk.n
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int8)
