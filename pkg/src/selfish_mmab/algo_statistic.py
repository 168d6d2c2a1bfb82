"""Selfish-robust algorithm under statistic sensing.

Timeline per player: estimate the number of players from collision
frequencies, wait, grab a rank by musical chairs on the first M arms,
wait again, then run the kl-UCB based ExploOne policy on a shifted
round-robin over the empirical top-M arms.
"""
from __future__ import annotations

import math

import numpy as np

from .numerics import DomainError, explo_budget, klucb_at_least, round_half_up
from .sim import Phase, Plan, Player

GAMMA1 = 13.0 / 14.0
GAMMA2 = 16.0 / 15.0


def estimate_m_finalize(N, C, K: int) -> int:
    """1 + round(log(1 - mean_k C_k/N_k) / log(1 - 1/K)), clamped to [1, K]."""
    N = np.asarray(N, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any(N <= 0):
        raise DomainError("every arm needs at least one observed collision bit")
    if K == 1:
        return 1
    rate = float(np.mean(C / N))
    if rate >= 1.0:
        return K
    m = 1 + round_half_up(math.log(1.0 - rate) / math.log(1.0 - 1.0 / K))
    return min(max(m, 1), K)


def phase_schedule(t_m: int, K: int, T: int, beta: float) -> tuple[int, int, int]:
    """End of the first waiting room, GetRank length, end of the second."""
    n = beta**2 * K**2 * math.log(T)
    end1 = math.ceil(GAMMA2 / GAMMA1 * t_m)
    getrank = math.ceil(t_m * math.log(T) / (GAMMA1 * n))
    end2 = math.ceil((GAMMA2 / (GAMMA1**2 * beta**2 * K**2) + GAMMA2**2 / GAMMA1**2) * t_m)
    return end1, getrank, max(end2, end1 + getrank)


def explo_slot(t: int, rank: int, M: int) -> int:
    return (t + rank + 1) % M


class SelfishRobustMMAB(Player):
    name = "selfish-robust-mmab"

    def __init__(self, beta: float = 39.0):
        super().__init__()
        self.beta = beta
        self.m_hat = None
        self.rank = None
        self.t_m = None

    def absorb(self, arms, xs) -> None:
        np.add.at(self.pulls, arms, 1)
        np.add.at(self.sums, arms, xs)

    def absorb1(self, a: int, x: float) -> None:
        self.pulls[a] += 1
        self.sums[a] += x

    def program(self):
        K, T = self.K, self.T
        self.pulls = np.zeros(K, dtype=np.int64)
        self.sums = np.zeros(K)
        yield from self.estimate_m()
        end1, getrank, end2 = phase_schedule(self.t_m, K, T, self.beta)
        self.set_phase(Phase.WAIT)
        while self.t < end1:
            blk = yield Plan(self.rng.peek_ints(min(end1 - self.t, 1 << 14), K), False)
            self.rng.advance(blk.n)
            self.absorb(blk.arms, blk.x)
        yield from self.get_rank(end1 + getrank)
        if self.rank is None:
            self.set_phase(Phase.FALLBACK)
            self.log("no-rank")
            while True:
                blk = yield Plan(self.rng.peek_ints(1 << 14, K), False)
                self.rng.advance(blk.n)
        self.set_phase(Phase.WAIT)
        while self.t < end2:
            blk = yield Plan(np.full(min(end2 - self.t, 1 << 14), self.rank, dtype=np.int64), False)
            self.absorb(blk.arms, blk.x)
        yield from self.explo_one()

    # -------------------------------------------------------------------
    def estimate_m(self):
        """Uniform play until every arm has `n` observed collision bits.

        A round observes at most one arm, so the total shortfall is a lower
        bound on the rounds left and plans never run past the stopping
        round.
        """
        K = self.K
        need = math.ceil(self.beta**2 * K**2 * math.log(self.T))
        self.set_phase(Phase.INIT_ESTIMATE)
        N = np.zeros(K, dtype=np.int64)
        C = np.zeros(K, dtype=np.int64)
        while self.t_m is None:
            t0 = self.t
            size = max(1, min(int(np.maximum(need - N, 0).sum()), 1 << 14))
            blk = yield Plan(self.rng.peek_ints(size, K), False)
            self.rng.advance(blk.n)
            self.absorb(blk.arms, blk.x)
            seen = blk.eta >= 0
            stop = 0
            for k in range(K):
                short = need - N[k]
                if short <= 0:
                    continue
                idx = np.flatnonzero(seen & (blk.arms == k))
                if idx.size < short:
                    stop = -1
                    break
                stop = max(stop, int(idx[short - 1]) + 1)
            upto = blk.n if stop < 0 else stop
            if stop >= 0:
                self.t_m = t0 + stop
            np.add.at(N, blk.arms[:upto][seen[:upto]], 1)
            np.add.at(C, blk.arms[:upto][blk.eta[:upto] == 1], 1)
        self.N, self.C = N, C
        self.m_hat = estimate_m_finalize(N, C, K)
        rate = float(np.mean(C / N))
        if K > 1 and rate < 1.0:
            raw = 1 + round_half_up(math.log(1.0 - rate) / math.log(1.0 - 1.0 / K))
            if raw != self.m_hat:
                self.log("m_hat-clamped", self.t_m)
        self.log(f"m_hat:{self.m_hat}", self.t_m)

    def get_rank(self, end: int):
        self.set_phase(Phase.GET_RANK)
        while self.t < end and self.rank is None:
            a = self.rng.integer(self.m_hat)
            x, _, r = yield a
            self.absorb1(a, x)
            if r > 0:
                self.rank = a
                self.log(f"rank:{a}")
        while self.t < end:
            blk = yield Plan(np.full(min(end - self.t, 1 << 14), self.rank, dtype=np.int64), False)
            self.absorb(blk.arms, blk.x)

    # -------------------------------------------------------------------
    def refresh(self) -> None:
        """Recompute the top-M list, its weakest arm and the arms to explore."""
        M = self.m_hat
        pulls = self.pulls
        mu = np.divide(self.sums, pulls, out=np.zeros(self.K), where=pulls > 0)
        order = sorted(range(self.K), key=lambda k: (-mu[k], k))
        top = order[:M]
        self.top = sorted(top)
        self.weakest = order[M - 1]
        level = float(mu[self.weakest])
        budget = explo_budget(self.t + 1)
        self.explore_set = [k for k in order[M:]
                            if klucb_at_least(float(mu[k]), int(pulls[k]), budget, level)]

    def explo_pick(self) -> int:
        l = self.top[explo_slot(self.t, self.rank, self.m_hat)]
        if l != self.weakest or not self.explore_set:
            return l
        if self.rng.random() < 0.5:
            return l
        return self.explore_set[self.rng.integer(len(self.explore_set))]

    def certified_horizon(self, limit: int) -> int:
        """Largest h (a multiple of M, at most `limit`) such that skipping the
        refreshes of the next h rounds provably changes nothing.

        Only used when the exploration set is empty, so the next h pulls are
        the round-robin over the top list and non-top arms stay frozen. Each
        top arm gets at most h/M new samples in [0, 1], which bounds how far
        its mean can move; the top list, its weakest arm and the empty
        exploration set must survive every such move, with the budget taken
        at its largest value in the window.
        """
        M = self.m_hat
        if self.explore_set or limit < M:
            return 0
        pulls, sums = self.pulls, self.sums
        top, w = self.top, self.weakest
        others = [k for k in range(self.K) if k not in top]
        if any(pulls[k] == 0 for k in range(self.K)):
            return 0
        best_other = max((sums[k] / pulls[k] for k in others), default=-1.0)

        def ok(h: int) -> bool:
            m = h // M
            lo_w = sums[w] / (pulls[w] + m)
            hi_w = (sums[w] + m) / (pulls[w] + m)
            if lo_w <= best_other:
                return False
            for a in top:
                if a != w and sums[a] / (pulls[a] + m) <= hi_w:
                    return False
            budget = explo_budget(self.t + h + 1)
            for k in others:
                if klucb_at_least(float(sums[k] / pulls[k]), int(pulls[k]), budget, lo_w):
                    return False
            return True

        if not ok(M):
            return 0
        h = M
        while 2 * h <= limit and ok(2 * h):
            h *= 2
        return h

    def explo_one(self):
        self.set_phase(Phase.EXPLORE)
        M = self.m_hat
        self.refresh()
        pulls, sums = self.pulls, self.sums
        while True:
            if self.t % M == 0:
                self.refresh()
                h = self.certified_horizon(min(self.T - self.t, 1 << 14))
                if h:
                    ts = self.t + np.arange(h)
                    top = np.asarray(self.top, dtype=np.int64)
                    arms = top[(ts + self.rank + 1) % M]
                    pos = 0
                    while pos < h:
                        blk = yield Plan(arms[pos:], False)
                        self.absorb(blk.arms, blk.x)
                        pos += blk.n
                    continue
            a = self.explo_pick()
            x, _, _ = yield a
            pulls[a] += 1
            sums[a] += x
