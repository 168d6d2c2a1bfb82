"""Run loop and the player protocol.

A player is a generator. At each step it yields either a single arm (an
int) or a `Plan`: a run of future arms known in advance together with a
mask of rounds where a collision would change its behavior. It then
receives the feedback for the rounds actually played: a tuple
(value, collision, reward) after an int, a `Block` after a plan.

Plans let the loop play many rounds at once with numpy. A plan is cut
right after the first round in which any player sees a collision it
declared relevant, so every player reacts at exactly the round it would
have reacted to when stepping one round at a time. Stepping mode
(`fast=False`) consumes one round of every plan per step and yields
identical traces; tests rely on that equivalence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .env import ArmDraws, EnvModel, ProtocolViolation, Sensing
from .streams import UniformStream, substream


class Phase(IntEnum):
    IDLE = 0
    INIT_ESTIMATE = 1
    INIT_RANK = 2
    WAIT = 3
    GET_RANK = 4
    EXPLORE = 5
    COMMUNICATE = 6
    EXPLOIT = 7
    INSPECT = 8
    LISTEN = 9
    SIGNAL = 10
    PUNISH_SIGNAL = 11
    PUNISH_ESTIMATE = 12
    PUNISH_SAMPLE = 13
    FALLBACK = 14
    DEVIATE = 15


INIT_PHASES = (Phase.INIT_ESTIMATE, Phase.INIT_RANK, Phase.WAIT, Phase.GET_RANK)
COMM_PHASES = (Phase.COMMUNICATE, Phase.LISTEN, Phase.SIGNAL)
PUNISH_PHASES = (Phase.PUNISH_SIGNAL, Phase.PUNISH_ESTIMATE, Phase.PUNISH_SAMPLE)


class Plan:
    __slots__ = ("arms", "sensitive")

    def __init__(self, arms, sensitive=True):
        self.arms = arms
        self.sensitive = sensitive

    def __len__(self):
        return len(self.arms)


class Block:
    """Feedback for the first `n` rounds of a plan. eta is -1 where unseen."""

    __slots__ = ("n", "arms", "x", "eta", "r")

    def __init__(self, n, arms, x, eta, r):
        self.n = n
        self.arms = arms
        self.x = x
        self.eta = eta
        self.r = r

    @property
    def collided(self) -> bool:
        return bool(self.n) and self.eta[-1] == 1


@dataclass
class PlayerContext:
    K: int
    T: int
    sensing: Sensing
    index: int
    rng: UniformStream
    truth: EnvModel | None = None


class Player:
    """Base class. Subclasses implement `program`."""

    name = "player"
    omniscient = False
    cooperative = True

    def __init__(self):
        self.t = 0
        self.phase = Phase.IDLE
        self.events: list[tuple[int, str]] = []
        self.ctx: PlayerContext | None = None

    def bind(self, ctx: PlayerContext) -> None:
        self.ctx = ctx
        self.K = ctx.K
        self.T = ctx.T
        self.rng = ctx.rng

    def log(self, kind: str, t: int | None = None) -> None:
        self.events.append((self.t if t is None else t, kind))

    def set_phase(self, phase: Phase) -> None:
        if phase != self.phase:
            self.phase = phase
            self.log(f"phase:{phase.name.lower()}")

    def program(self):
        raise NotImplementedError
        yield  # pragma: no cover


@dataclass
class RunResult:
    model: EnvModel
    seed: int
    rounds: int
    arms: np.ndarray
    collided: np.ndarray
    reward: np.ndarray
    phase: np.ndarray
    events: list = field(default_factory=list)
    players: list = field(default_factory=list)

    def first_event(self, prefix: str, players=None) -> int:
        hits = [t for t, j, k in self.events
                if k.startswith(prefix) and (players is None or j in players)]
        return min(hits) if hits else -1


def collisions(arms: np.ndarray) -> np.ndarray:
    """Boolean matrix: player j collides in round i."""
    n, M = arms.shape
    out = np.zeros((n, M), dtype=bool)
    for a in range(M):
        for b in range(a + 1, M):
            eq = arms[:, a] == arms[:, b]
            out[:, a] |= eq
            out[:, b] |= eq
    return out


class Simulation:
    """Drives M players against one environment for up to T rounds."""

    def __init__(self, model: EnvModel, players: list[Player], seed: int, fast: bool = True,
                 max_plan: int = 1 << 14):
        if len(players) != model.M:
            raise ValueError(f"need {model.M} players, got {len(players)}")
        self.model = model
        self.players = players
        self.seed = seed
        self.fast = fast
        self.max_plan = max_plan
        self.draws = ArmDraws(model, substream(seed, "env"))
        T, M = model.T, model.M
        self.arms = np.zeros((T, M), dtype=np.int16)
        self.coll = np.zeros((T, M), dtype=bool)
        self.rew = np.zeros((T, M), dtype=np.float32)
        self.phase = np.zeros((T, M), dtype=np.int8)
        self.t = 0
        for j, p in enumerate(players):
            truth = model if p.omniscient else None
            p.bind(PlayerContext(model.K, T, model.sensing, j,
                                 UniformStream(substream(seed, "player", j)), truth))
        self.gens = [p.program() for p in players]
        self.acts = [next(g) for g in self.gens]

    # ------------------------------------------------------------------
    def run(self, until: int | None = None) -> RunResult:
        end = self.model.T if until is None else min(until, self.model.T)
        while self.t < end:
            if self.fast and all(a.__class__ is Plan for a in self.acts):
                self._bulk(end)
            else:
                self._single()
        return self.result()

    def result(self) -> RunResult:
        ev = sorted((t, j, k) for j, p in enumerate(self.players) for t, k in p.events)
        n = self.t
        return RunResult(self.model, self.seed, n, self.arms[:n], self.coll[:n], self.rew[:n],
                         self.phase[:n], ev, self.players)

    # ------------------------------------------------------------------
    def _bad(self, j, a):
        raise ProtocolViolation(j, f"arm {a!r} out of range [0, {self.model.K})")

    def _single(self) -> None:
        m = self.model
        t = self.t
        K = m.K
        acts = self.acts
        arms = []
        for j, a in enumerate(acts):
            if a.__class__ is Plan:
                a = a.arms[0]
            a = int(a)
            if not 0 <= a < K:
                self._bad(j, a)
            arms.append(a)
        row = self.draws.row(t)
        het = m.heterogeneous
        sensing = m.sensing
        phases = [p.phase for p in self.players]
        colls = []
        rews = []
        for j, a in enumerate(arms):
            eta = 1 if arms.count(a) > 1 else 0
            x = row[j][a] if het else row[a]
            r = 0.0 if eta else x
            colls.append(eta)
            rews.append(r)
            if sensing is Sensing.FULL:
                fb = (x, eta, r)
            elif sensing is Sensing.STATISTIC:
                fb = (x, eta if x > 0 else None, r)
            else:
                fb = (None, None, r)
            if acts[j].__class__ is Plan:
                e = fb[1]
                fb = Block(1, np.array([a]), None if fb[0] is None else np.array([x]),
                           np.array([-1 if e is None else e], dtype=np.int8), np.array([r]))
            p = self.players[j]
            p.t = t + 1
            acts[j] = self.gens[j].send(fb)
        self.arms[t] = arms
        self.coll[t] = colls
        self.rew[t] = rews
        self.phase[t] = phases
        self.t = t + 1

    def _bulk(self, end: int) -> None:
        m = self.model
        t = self.t
        acts = self.acts
        n = min(min(len(a) for a in acts), end - t, self.max_plan)
        A = np.empty((n, m.M), dtype=np.int64)
        for j, a in enumerate(acts):
            col = np.asarray(a.arms[:n])
            if col.size and (col.min() < 0 or col.max() >= m.K):
                self._bad(j, int(col[(col < 0) | (col >= m.K)][0]))
            A[:, j] = col
        C = collisions(A)
        cut = n
        for j, a in enumerate(acts):
            s = a.sensitive
            if s is False:
                continue
            hit = C[:, j] if s is True else C[:, j] & np.asarray(s[:n], dtype=bool)
            idx = np.flatnonzero(hit[:cut])
            if idx.size:
                cut = int(idx[0]) + 1
        n = cut
        A = A[:n]
        C = C[:n]
        X = self.draws.block(t, n)
        rows = np.arange(n)
        if m.heterogeneous:
            xs = np.stack([X[rows, j, A[:, j]] for j in range(m.M)], axis=1)
        else:
            xs = X[rows[:, None], A]
        R = np.where(C, 0.0, xs)
        self.arms[t:t + n] = A
        self.coll[t:t + n] = C
        self.rew[t:t + n] = R
        self.phase[t:t + n] = [p.phase for p in self.players]
        for j, p in enumerate(self.players):
            cj = C[:, j].astype(np.int8)
            xj = xs[:, j]
            if m.sensing is Sensing.FULL:
                blk = Block(n, A[:, j], xj, cj, R[:, j])
            elif m.sensing is Sensing.STATISTIC:
                blk = Block(n, A[:, j], xj, np.where(xj > 0, cj, -1).astype(np.int8), R[:, j])
            else:
                blk = Block(n, A[:, j], None, np.full(n, -1, dtype=np.int8), R[:, j])
            p.t = t + n
            acts[j] = self.gens[j].send(blk)
        self.t = t + n


def simulate(model: EnvModel, players: list[Player], seed: int, fast: bool = True,
             until: int | None = None) -> RunResult:
    return Simulation(model, players, seed, fast=fast).run(until)
