"""Selfish and malicious strategies.

Each one is a regular player: it sees its own feedback only, plus the true
means when flagged omniscient. At most one deviator per run.
"""
from __future__ import annotations

import math

import numpy as np

from .algo_rsdgt import RsdGT
from .algo_sicgt import SicGT
from .algo_statistic import SelfishRobustMMAB
from .sim import Phase, Plan, Player


def _own_means(player: Player) -> np.ndarray:
    truth = player.ctx.truth
    if truth is None:
        raise RuntimeError(f"{player.name} needs the true means (omniscient)")
    return truth.player_means(player.ctx.index)


class BestArmCommitter(Player):
    """Pulls the arm with the highest own mean in every round."""

    name = "best-arm"
    omniscient = True
    cooperative = False

    def program(self):
        mu = _own_means(self)
        arm = int(np.argmax(mu))
        self.set_phase(Phase.DEVIATE)
        arms = np.full(1 << 14, arm, dtype=np.int64)
        while True:
            yield Plan(arms, False)


class Jammer(Player):
    """Sits on a fixed arm, optionally only from round `start` on."""

    name = "jammer"
    cooperative = False

    def __init__(self, arm: int, start: int = 0):
        super().__init__()
        self.arm = arm
        self.start = start

    def program(self):
        if self.start > 0:
            yield Plan(np.full(self.start, (self.arm + 1) % self.K, dtype=np.int64), False)
        self.set_phase(Phase.DEVIATE)
        arms = np.full(1 << 14, self.arm, dtype=np.int64)
        while True:
            yield Plan(arms, False)


class RankRigger(RsdGT):
    """RSD-GT that insists on arm 0 during musical chairs to grab rank 0."""

    name = "rank-rigger"
    cooperative = False

    def choose_rank_arm(self, m_hat: int) -> int:
        return 0


class StatLiar(SicGT):
    """Honest SIC-GT except for the statistics it reports on one arm.

    `value` goes to leader 0 and `value_other` (defaults to `value`) to
    leader 1. Values are snapped down to the phase grid so they encode.
    """

    name = "stat-liar"
    cooperative = False

    def __init__(self, arm: int, value: float, value_other: float | None = None):
        super().__init__()
        self.arm = arm
        self.value = value
        self.value_other = value if value_other is None else value_other

    def outgoing_value(self, k: int, leader: int, honest: float, p: int) -> float:
        if k != self.arm:
            return honest
        v = self.value if leader == 0 else self.value_other
        return math.floor(min(max(v, 0.0), 1.0) * (1 << p)) / (1 << p)


class MessageCorruptor(SicGT):
    """Honest SIC-GT that flips one bit of one transmission it overhears.

    The targeted transmission is (phase p, sender i, leader l, arm k); a
    None field matches anything, so the first overheard transmission that
    fits is hit. On the outgoing leg the corruptor collides with the
    leader's rank arm at bit `bit`, or at every bit when `bit` is None;
    on the echo leg with the sender's.
    """

    name = "message-corruptor"
    cooperative = False

    def __init__(self, p: int = 1, sender: int | None = None, leader: int | None = None,
                 arm: int | None = None, bit: int | None = None, leg: str = "out"):
        super().__init__()
        if leg not in ("out", "back"):
            raise ValueError("leg must be 'out' or 'back'")
        self.target = (p, sender, leader, arm)
        self.bit = bit
        self.leg = leg
        self.fired = False

    def matches(self, context) -> bool:
        if len(context) != 4 or context[1] == "check":
            return False
        return all(want is None or want == got for want, got in zip(self.target, context))

    def wait_rounds(self, n: int, context):
        if self.fired or not self.matches(context):
            yield from super().wait_rounds(n, context)
            return
        self.fired = True
        p, sender, leader, _ = context
        nb = p + 1
        victim = leader if self.leg == "out" else sender
        bits = range(nb) if self.bit is None else [self.bit]
        at = [b if self.leg == "out" else nb + b for b in bits]
        arms = np.full(n, self.rank, dtype=np.int64)
        arms[at] = victim
        self.log(f"corrupt:{self.leg}:{'all' if self.bit is None else self.bit}")
        left = n
        while left > 0:
            blk = yield Plan(arms[n - left:], False)
            left -= blk.n


class PreferenceLiar(RsdGT):
    """RSD-GT broadcasting the ranking of a fake mean vector at its first
    dictator block. With `deviate`, it then sits on its empirically best
    arm instead of the attributed one once everybody exploits."""

    name = "preference-liar"
    cooperative = False

    def __init__(self, fake_means, deviate: bool = False, delta: float = 0.0):
        super().__init__(delta)
        self.fake = np.asarray(fake_means, dtype=float)
        self.deviate = deviate

    def ready_preferences(self):
        order = sorted(range(self.K), key=lambda k: (-self.fake[k], k))
        return tuple(order[:self.m_hat])

    def exploit_arm(self, own: int, asg) -> int:
        if not self.deviate:
            return own
        mu = self.mu
        return int(max(range(self.K), key=lambda k: (mu[k], -k)))


class GreedyBestResponse(SelfishRobustMMAB):
    """Honest until ExploOne, then pulls its slot of the true top-M and
    never explores, so it never pays for exploration."""

    name = "greedy-best-response"
    omniscient = True
    cooperative = False

    def refresh(self) -> None:
        mu = _own_means(self)
        order = sorted(range(self.K), key=lambda k: (-mu[k], k))
        self.top = sorted(order[:self.m_hat])
        self.weakest = order[self.m_hat - 1]
        self.explore_set = []

    def certified_horizon(self, limit: int) -> int:
        # the true top list never changes, so any horizon is safe
        return limit - limit % self.m_hat


ADVERSARIES = {
    "best-arm": BestArmCommitter,
    "jammer": Jammer,
    "rank-rigger": RankRigger,
    "stat-liar": StatLiar,
    "message-corruptor": MessageCorruptor,
    "preference-liar": PreferenceLiar,
    "greedy-best-response": GreedyBestResponse,
}
