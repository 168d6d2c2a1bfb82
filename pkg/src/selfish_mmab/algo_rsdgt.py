"""RSD-GT: random serial dictatorship with grim trigger, full sensing,
delta-heterogeneous means.

After the shared init, time is cut into blocks of 5K + MK + M^2K rounds
aligned on the end of init. Block b uses dictator order (d, d+1, ...)
with d = b mod M, and only player d may broadcast its preferences in it.
Explorers cycle all K arms; exploiters hold the arm serial dictatorship
gives them among exploiters. Once everyone is exploiting, random
inspections check that each player sits on its attributed arm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import FullSensingPlayer, play, rr, rr_run
from .env import ConfigError, ProtocolViolation
from .numerics import punishment_gamma
from .punish import punishment
from .sim import Phase, Plan

EXPLORING = "exploring"
EXPLOITING = "exploiting"
PUNISHING = "punishing"


def block_length(K: int, M: int) -> int:
    return 5 * K + M * K + M * M * K


def dictator_order(d: int, M: int) -> list[int]:
    return [(d + s) % M for s in range(M)]


def semi_het_alpha(K: int, M: int, delta: float) -> float:
    """((1+delta)/(1-delta))^2 (1-1/K)^(M-1)."""
    return punishment_gamma(K, M, delta)


def check_delta(K: int, M: int, delta: float) -> None:
    if not 0.0 <= delta < 1.0:
        raise ConfigError("delta", f"{delta} is not in [0, 1)")
    a = semi_het_alpha(K, M, delta)
    if a >= 1.0:
        raise ConfigError("delta", f"alpha = {a:.4f} >= 1 for K={K}, M={M}: punishment "
                                   f"cannot cap a deviator, lower delta")


@dataclass(frozen=True)
class RsdAssignment:
    arms: tuple
    comm_arm: int


def rsd_attribution(prefs, d: int, t: int, K: int, order=None) -> RsdAssignment:
    """Serial dictatorship among players with known preference lists.

    `prefs[i]` is player i's ordered top-M list, or None when unknown;
    unknown dictators get the exploration arm rr(t, i, K). `order`
    overrides the rotation (d, d+1, ...) with an explicit dictator order.
    """
    M = len(prefs)
    taken = set()
    arms = [0] * M
    for i in (dictator_order(d, M) if order is None else order):
        col = prefs[i]
        if col is None:
            arms[i] = rr(t, i, K)
            continue
        if len(set(col)) != len(col):
            raise ProtocolViolation(i, f"preference list {col} repeats an arm")
        pick = next((a for a in col if a not in taken), None)
        if pick is None:
            raise ProtocolViolation(i, "preference list exhausted")
        arms[i] = pick
        taken.add(pick)
    free = [a for a in range(K) if a not in taken]
    if not free:
        raise ProtocolViolation(-1, "no free communication arm (M must be < K)")
    return RsdAssignment(tuple(arms), free[0])


def separated_top(mu, pulls, T: int, M: int):
    """The ordered top-M arms if each consecutive pair in the top M+1 is
    separated by the confidence radii sqrt(2 log T / T_k), else None."""
    K = len(mu)
    order = sorted(range(K), key=lambda k: (-mu[k], k))
    with np.errstate(divide="ignore"):
        b = np.sqrt(2.0 * math.log(T) / np.asarray(pulls, dtype=float))
    for k in range(min(M, K - 1)):
        a, c = order[k], order[k + 1]
        if mu[a] - b[a] < mu[c] + b[c]:
            return None
    return tuple(order[:M])


class RsdGT(FullSensingPlayer):
    name = "rsd-gt"

    def __init__(self, delta: float = 0.0):
        super().__init__()
        if not 0.0 <= delta < 1.0:
            raise ConfigError("delta", f"{delta} is not in [0, 1)")
        self.delta = delta
        self.state = EXPLORING
        self.prefs = None
        self.last_coll = None
        self.sent = None

    # hooks for deviating subclasses -----------------------------------
    def ready_preferences(self):
        """Ranking to broadcast at the start of the own block, or None."""
        return separated_top(self.mu, self.cnt, self.T, self.m_hat)

    def exploit_arm(self, own: int, asg: RsdAssignment) -> int:
        return own

    # -------------------------------------------------------------------
    def clock(self) -> tuple[int, int]:
        return divmod(self.t - self.t0, self.L)

    def trigger(self, why: str) -> None:
        if self.state != PUNISHING:
            self.state = PUNISHING
            self.log(f"punish:{why}")

    def assignment(self, b: int, t: int | None = None) -> RsdAssignment:
        return rsd_attribution(self.prefs, b % self.m_hat, self.t if t is None else t, self.K)

    def program(self):
        yield from self.full_init()
        if self.rank is None:
            yield from self.fallback()
        K, M, j = self.K, self.m_hat, self.rank
        if M >= K:
            self.log("no-comm-arm")
            yield from self.fallback()
        check_delta(K, M, self.delta)
        self.t0 = self.t
        self.L = block_length(K, M)
        self.prefs = [None] * M
        self.sums = np.zeros(K)
        self.cnt = np.zeros(K, dtype=np.int64)
        self.p_inspect = math.sqrt(math.log(self.T)) / self.T
        while self.state != PUNISHING:
            b, bt = self.clock()
            if bt == 0 and b % M == j and self.state == EXPLORING:
                lam = self.ready_preferences()
                if lam is not None:
                    yield from self.pref_signal(lam)
                    continue
            if self.state == EXPLORING:
                yield from self.explore_step()
            elif any(c is None for c in self.prefs):
                yield from self.exploit_partial_step()
            else:
                yield from self.exploit_full_step()
        yield from self.punish_semi()

    @property
    def mu(self) -> np.ndarray:
        return np.divide(self.sums, self.cnt, out=np.zeros(self.K), where=self.cnt > 0)

    def note_complete(self) -> None:
        if all(c is not None for c in self.prefs):
            self.log("all-prefs")

    # -------------------------------------------------------------------
    def on_signal(self, bt: int):
        """React to an unexpected collision seen at block offset bt."""
        if bt >= 4 * self.K:
            self.trigger("late-signal")
        else:
            yield from self.listen(bt)

    def explore_step(self):
        K, j = self.K, self.rank
        self.set_phase(Phase.EXPLORE)
        b, bt = self.clock()
        comm = self.assignment(b).comm_arm
        arms = rr_run(self.t, j, self.L - bt, K)
        sens = arms == comm
        blk = yield Plan(arms, sens)
        np.add.at(self.sums, blk.arms, blk.x)
        np.add.at(self.cnt, blk.arms, 1)
        if blk.collided and sens[blk.n - 1]:
            yield from self.on_signal(bt + blk.n - 1)

    def exploit_partial_step(self):
        K, M, j = self.K, self.m_hat, self.rank
        self.set_phase(Phase.EXPLOIT)
        b, bt = self.clock()
        asg = self.assignment(b)
        own = asg.arms[j]
        n = self.L - bt
        explorers = np.array([i for i in range(M) if self.prefs[i] is None and i != j])
        ts = self.t + np.arange(n)
        mask = ~np.any((ts[:, None] + explorers[None, :] + 1) % K == own, axis=1)
        blk = yield Plan(np.full(n, own, dtype=np.int64), mask)
        if blk.collided and mask[blk.n - 1]:
            yield from self.on_signal(bt + blk.n - 1)

    def exploit_full_step(self):
        M, j = self.m_hat, self.rank
        b, bt = self.clock()
        asg = self.assignment(b)
        n = self.L - bt
        k = self.rng.first_below(self.p_inspect, n)
        if k > 0:
            self.set_phase(Phase.EXPLOIT)
            own = self.exploit_arm(asg.arms[j], asg)
            blk = yield Plan(np.full(k, own, dtype=np.int64), True)
            self.rng.advance(blk.n)
            if blk.collided:
                tc = self.t - 1
                if self.last_coll == tc - 1:
                    self.trigger("two-collisions")
                self.last_coll = tc
            return
        self.rng.advance(1)
        self.set_phase(Phase.INSPECT)
        others = [i for i in range(M) if i != j]
        target = others[self.rng.integer(len(others))]
        _, eta, _ = yield asg.arms[target]
        self.last_coll = None
        self.log(f"inspect:{target}")
        if eta == 0:
            self.trigger("inspection")

    # -------------------------------------------------------------------
    def send_bit(self, exploit_players, comm: int):
        """K rounds sweeping all arms with the first exploiter's offset, so
        every sitting exploiter is hit once, then K rounds on comm_arm, which
        every explorer crosses once."""
        K = self.K
        jt = min(exploit_players) if exploit_players else self.rank
        yield from play(rr_run(self.t, jt, K, K))
        yield from play(np.full(K, comm, dtype=np.int64))

    def wait_until(self, bt_end: int):
        _, bt = self.clock()
        if bt_end > bt:
            yield from play(rr_run(self.t, self.rank, bt_end - bt, self.K))

    def repetition(self, lam) -> bool:
        """M^2 K rounds: player l repeats slot m for K rounds each.
        Returns True if some repeated slot disagrees with `lam`."""
        K, M, j = self.K, self.m_hat, self.rank
        arms = []
        for l in range(M):
            for m in range(M):
                if l == j:
                    a = lam[m] if lam[m] is not None else rr(self.t, j, K)
                    arms.append(np.full(K, a, dtype=np.int64))
                else:
                    arms.append(None)
        t = self.t
        seq = np.concatenate([a if a is not None else rr_run(t + i * K, j, K, K)
                              for i, a in enumerate(arms)])
        eta = yield from play(seq)
        bad = False
        for i, a in enumerate(arms):
            if a is not None:
                continue
            m = i % M
            seg = slice(i * K, (i + 1) * K)
            hit = seq[seg][eta[seg] == 1]
            if any(lam[m] != int(k) for k in hit):
                bad = True
        return bad

    def listen(self, bt_detect: int):
        K, M, j = self.K, self.m_hat, self.rank
        self.set_phase(Phase.LISTEN)
        b, _ = self.clock()
        d = b % M
        asg = self.assignment(b)
        self.log(f"listen:{d}")
        bad = False
        if self.prefs[d] is not None or d == j:
            bad = True
            self.log("already-sent")
        if bt_detect < 2 * K:
            yield from self.wait_until(2 * K)
            known = [i for i in range(M) if self.prefs[i] is not None]
            yield from self.send_bit(known, asg.comm_arm)
        else:
            yield from self.wait_until(4 * K)
        left = K
        while left > 0:
            if bad:
                yield from play(np.full(left, j, dtype=np.int64))
                break
            blk = yield Plan(rr_run(self.t, j, left, K), True)
            left -= blk.n
            if blk.collided:
                bad = True
                self.log("punish-signal-received")
        seq = rr_run(self.t, j, M * K, K)
        eta = yield from play(seq)
        lam = [None] * M
        for n in np.flatnonzero(eta == 1):
            m = int(n) // K
            if lam[m] is not None:
                bad = True
                self.log("two-signals")
            else:
                lam[m] = int(seq[n])
        if (yield from self.repetition(lam)):
            bad = True
            self.log("info-differs")
        if any(a is None for a in lam) or len(set(lam)) != M:
            bad = True
            self.log("incomplete-preferences")
        if bad:
            self.trigger("listen")
        else:
            self.prefs[d] = tuple(lam)
            self.log(f"prefs:{d}:{list(lam)}")
            self.note_complete()
        if self.state == PUNISHING:
            return
        self.set_phase(Phase.EXPLORE if self.state == EXPLORING else Phase.EXPLOIT)

    def pref_signal(self, lam):
        K, M, j = self.K, self.m_hat, self.rank
        self.set_phase(Phase.SIGNAL)
        b, _ = self.clock()
        asg = self.assignment(b)
        lam = tuple(int(a) for a in lam)
        self.sent = lam
        self.log(f"send-prefs:{list(lam)}")
        known = [i for i in range(M) if i != j and self.prefs[i] is not None]
        yield from self.send_bit(known, asg.comm_arm)
        yield from self.wait_until(4 * K)
        bad = False
        eta = yield from play(rr_run(self.t, j, K, K))
        if np.any(eta == 1):
            bad = True
            self.log("punish-signal-received")
        yield from play(np.repeat(np.asarray(lam, dtype=np.int64), K))
        if (yield from self.repetition(list(lam))):
            bad = True
            self.log("info-differs")
        self.prefs[j] = lam
        self.state = EXPLOITING
        self.note_complete()
        if bad:
            self.trigger("pref-signal")

    # -------------------------------------------------------------------
    def punish_semi(self):
        K, M, j = self.K, self.m_hat, self.rank
        self.set_phase(Phase.PUNISH_SIGNAL)
        if all(c is not None for c in self.prefs):
            for i in range(M):
                if i == j:
                    continue
                for _ in range(2):
                    b, _ = self.clock()
                    yield self.assignment(b).arms[i]
        else:
            b, bt = self.clock()
            start = 3 * K if bt <= 3 * K else self.L + 3 * K
            yield from play(rr_run(self.t, j, start - bt, K))
            b, _ = self.clock()
            known = [i for i in range(M) if i != j and self.prefs[i] is not None]
            yield from self.send_bit(known, self.assignment(b).comm_arm)
        yield from punishment(self, j, M, self.delta)
