"""SIC-GT: collisionless exploration with collision-bit statistics sharing,
two leaders deciding accept/reject on trimmed means, and grim-trigger
punishment. Full sensing, homogeneous means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import FullSensingPlayer, rr
from .commproto import (dyadic_bits, receive_bits, send_bits, signal_set_leader,
                        signal_set_receiver)
from .numerics import quantize, trimmed_mean
from .punish import punishment
from .sim import Phase, Plan

LEADERS = (0, 1)


@dataclass
class UpdateDecision:
    acc: set
    rej: set
    bound: float


def confidence_bound(T: int, M: int, p: int) -> float:
    """4 sqrt(log T / (n 2^(p+1))), n = M-2 reports survive trimming.

    With fewer than three players nothing is trimmed and n = M.
    """
    n = M - 2 if M >= 3 else max(M, 1)
    return 4.0 * math.sqrt(math.log(T) / (n * 2 ** (p + 1)))


def aggregate(values) -> float:
    """Trimmed mean when possible, plain mean for one or two reports."""
    if len(values) >= 3:
        return trimmed_mean(values)
    return math.fsum(values) / len(values)


def update_decide(means: dict, active, Mp: int, b: float) -> UpdateDecision:
    """Reject arms dominated by Mp others, accept arms dominating Kp-Mp others."""
    Kp = len(active)
    acc, rej = set(), set()
    for k in active:
        worse = sum(1 for i in active if means[i] - b >= means[k] + b)
        better = sum(1 for i in active if means[k] - b >= means[i] + b)
        if worse >= Mp:
            rej.add(k)
        if better >= Kp - Mp:
            acc.add(k)
    return UpdateDecision(acc, rej, b)


def exploration_schedule(active, opt, M: int, rank: int, p: int, t0: int):
    """Arms pulled during exploration phase p, and the first ArmstoPull
    element of each round's window."""
    Kp = len(active)
    Mp = M - len(opt)
    W = math.ceil(Kp * 2 ** p / Mp)
    act = np.asarray(active, dtype=np.int64)
    pos = (np.arange(W)[:, None] * Mp + np.arange(Mp)[None, :]) % Kp
    win = act[pos]
    if opt:
        win = np.concatenate((np.tile(np.asarray(opt, dtype=np.int64), (W, 1)), win), axis=1)
    win = np.sort(win, axis=1)
    cols = (t0 + np.arange(M) + rank + 1) % M
    return win[:, cols].ravel(), np.repeat(win[:, 0], M)


class SicGT(FullSensingPlayer):
    name = "sic-gt"

    def __init__(self):
        super().__init__()
        self.punished = False
        self.sent_log = {}
        self.comm_log = []

    # hooks for deviating subclasses -----------------------------------
    def outgoing_value(self, k: int, leader: int, honest: float, p: int) -> float:
        return honest

    def wait_rounds(self, n: int, context):
        yield from self.hold(self.rank, n)

    # -------------------------------------------------------------------
    def raise_punish(self, why: str) -> None:
        if not self.punished:
            self.punished = True
            self.log(f"punish:{why}")

    def program(self):
        yield from self.full_init()
        if self.rank is None:
            yield from self.fallback()
        K, M, j = self.K, self.m_hat, self.rank
        self.mu = np.zeros(K)
        self.cnt = np.zeros(K, dtype=np.int64)
        self.active = list(range(K))
        self.opt = []
        p = 1
        while len(self.opt) < M:
            if len(self.active) < M - len(self.opt):
                self.opt = sorted(self.opt + self.active)
                break
            yield from self.explore(p)
            yield from self.mean_signal(p)
            if self.punished:
                break
            p += 1
        if self.punished:
            yield from self.signal_next_phase(p + 1)
            yield from punishment(self, j, M)
        yield from self.exploit()

    # -------------------------------------------------------------------
    def explore(self, p: int):
        M, j = self.m_hat, self.rank
        self.set_phase(Phase.EXPLORE)
        arms, first = exploration_schedule(self.active, self.opt, M, j, p, self.t)
        quota = np.zeros(self.K, dtype=np.int64)
        is_active = np.zeros(self.K, dtype=bool)
        is_active[self.active] = True
        cap = 2 ** p
        pos = 0
        while pos < arms.size:
            blk = yield Plan(arms[pos:], True)
            for k in np.unique(blk.arms):
                if not is_active[k] or quota[k] >= cap:
                    continue
                xs = blk.x[blk.arms == k][:cap - quota[k]]
                quota[k] += xs.size
                for v in xs:
                    self.cnt[k] += 1
                    self.mu[k] += (v - self.mu[k]) / self.cnt[k]
            pos += blk.n
            if blk.collided:
                self.raise_punish("explore-collision")
                yield from self.signal_in_exploration(arms, first, pos)
                yield from punishment(self, j, M)

    def signal_in_exploration(self, arms, first, pos: int):
        """Make every cooperative player notice the trigger.

        If a full window remains, pull each round's first ArmstoPull arm
        through the end of the next full window: every player visits that
        arm once per window. Otherwise sit on the own rank arm until the
        end of the next communication's K-round scan.
        """
        M = self.m_hat
        self.set_phase(Phase.PUNISH_SIGNAL)
        nxt = -(-pos // M) * M
        if nxt + M <= arms.size:
            left = nxt + M - pos
            while left > 0:
                blk = yield Plan(first[pos:nxt + M], False)
                pos += blk.n
                left -= blk.n
        else:
            yield from self.hold(self.rank, arms.size - pos + self.K)

    def signal_next_phase(self, p: int):
        """Signal at the start of the phase following a communication."""
        M = self.m_hat
        self.set_phase(Phase.PUNISH_SIGNAL)
        if len(self.opt) >= M or len(self.active) < M - len(self.opt):
            opt = sorted(self.opt + (self.active if len(self.opt) < M else []))
            yield from self.hold(opt[0], M)
        else:
            arms, first = exploration_schedule(self.active, self.opt, M, self.rank, p, self.t)
            yield from self.signal_in_exploration(arms, first, 0)

    # -------------------------------------------------------------------
    def mean_signal(self, p: int):
        K, M, j = self.K, self.m_hat, self.rank
        self.set_phase(Phase.COMMUNICATE)
        for _ in range(K):
            a = rr(self.t, j, K)
            fb = yield a
            if fb[1] == 1:
                self.raise_punish("signal-received")
        q = [quantize(min(max(float(m), 0.0), 1.0), p, self.rng) for m in self.mu]
        self.sent_log[p] = q
        nb = p + 1
        leaders = [l for l in LEADERS if l < M]
        recv = {}
        if j in leaders:
            for k in range(K):
                recv[(j, k)] = self.outgoing_value(k, j, q[k], p)
        for i in range(M):
            for l in leaders:
                if i == l:
                    continue
                for k in range(K):
                    self.comm_log.append((self.t, p, i, l, k))
                    if j == i:
                        val = self.outgoing_value(k, l, q[k], p)
                        yield from send_bits(j, l, dyadic_bits(val, p))
                        echo = yield from receive_bits(j, nb)
                        if echo != val:
                            self.raise_punish("echo-mismatch")
                    elif j == l:
                        v = yield from receive_bits(j, nb)
                        if v > 1.0:
                            self.raise_punish("value-above-one")
                        recv[(i, k)] = min(v, 1.0)
                        yield from send_bits(j, i, dyadic_bits(v, p))
                    else:
                        yield from self.wait_rounds(2 * nb, (p, i, l, k))
        if len(leaders) == 2:
            for a, b in ((0, 1), (1, 0)):
                for m in range(M):
                    for k in range(K):
                        if j == a:
                            yield from send_bits(j, b, dyadic_bits(recv[(m, k)], p))
                        elif j == b:
                            v = yield from receive_bits(j, nb)
                            if v != recv[(m, k)]:
                                self.raise_punish("leader-mismatch")
                        else:
                            yield from self.wait_rounds(nb, (p, "check", a, b, m, k))
        if j in leaders:
            means = {k: aggregate([recv[(i, k)] for i in range(M)]) for k in self.active}
            dec = update_decide(means, self.active, M - len(self.opt),
                                confidence_bound(self.T, M, p))
            acc = yield from signal_set_leader(self, j, K, dec.acc)
            rej = yield from signal_set_leader(self, j, K, dec.rej)
            acc, rej = acc[0], rej[0]
        else:
            acc, bad1 = yield from signal_set_receiver(self, j, K)
            rej, bad2 = yield from signal_set_receiver(self, j, K)
            if bad1 or bad2:
                self.raise_punish("set-mismatch")
        if acc:
            self.log(f"accept:{sorted(int(a) for a in acc)}")
        if rej:
            self.log(f"reject:{sorted(int(a) for a in rej)}")
        self.opt = sorted(set(self.opt) | acc)
        self.active = [k for k in self.active if k not in acc and k not in rej]

    # -------------------------------------------------------------------
    def exploit(self):
        M, j = self.m_hat, self.rank
        self.set_phase(Phase.EXPLOIT)
        opt = np.asarray(sorted(self.opt), dtype=np.int64)
        n = opt.size
        while True:
            t0 = self.t
            arms = opt[(t0 + np.arange(1 << 14) + j + 1) % n]
            blk = yield Plan(arms, True)
            if blk.collided:
                self.raise_punish("exploit-collision")
                self.set_phase(Phase.PUNISH_SIGNAL)
                yield from self.hold(int(opt[0]), M)
                yield from punishment(self, j, M)
