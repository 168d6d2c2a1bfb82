"""Synchronous multiplayer bandit environment with collisions.

Arms are indexed 0..K-1 and players 0..M-1. Each round every arm (or every
player-arm pair in the heterogeneous case) gets a fresh draw; two or more
players on the same arm collide and all of them get reward zero.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .streams import substream


class Sensing(str, Enum):
    FULL = "full"
    STATISTIC = "statistic"
    NONE = "none"


class ConfigError(ValueError):
    """Invalid model or run configuration. `field` names the culprit."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


class ProtocolViolation(RuntimeError):
    def __init__(self, player: int, msg: str):
        super().__init__(f"player {player}: {msg}")
        self.player = player


def feasible_base(means: np.ndarray, delta: float) -> np.ndarray | None:
    """A base vector certifying delta-heterogeneity, or None if none exists.

    Arm k admits a base value b iff max_j mu_k^j / (1+delta) <= b <=
    min_j mu_k^j / (1-delta); the midpoint of that interval is returned.
    """
    lo = means.max(axis=0) / (1.0 + delta)
    hi = means.min(axis=0) / (1.0 - delta)
    if np.any(lo > hi + 1e-12):
        return None
    return 0.5 * (lo + np.maximum(hi, lo))


@dataclass(frozen=True)
class EnvModel:
    """Immutable problem description.

    `means` is a length-K vector (homogeneous) or an M x K matrix
    (heterogeneous). `masses`, when given, selects the discrete law on
    {0, 0.5, 1}: an array of shape means.shape + (3,).
    """

    K: int
    M: int
    T: int
    means: np.ndarray
    sensing: Sensing = Sensing.FULL
    delta: float = 0.0
    masses: np.ndarray | None = None
    base: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if self.masses is not None:
            masses = np.asarray(self.masses, dtype=float)
            if masses.shape[-1] != 3 or np.any(masses < 0):
                raise ConfigError("masses", "need nonnegative triples for {0, 0.5, 1}")
            masses = masses / masses.sum(axis=-1, keepdims=True)
            object.__setattr__(self, "masses", masses)
            means = 0.5 * masses[..., 1] + masses[..., 2]
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sensing", Sensing(self.sensing))
        if self.K < 1:
            raise ConfigError("K", "must be positive")
        if not 1 <= self.M <= self.K:
            raise ConfigError("M", f"need 1 <= M <= K, got M={self.M}, K={self.K}")
        if self.T < 1:
            raise ConfigError("T", "must be positive")
        if np.any(means < 0) or np.any(means > 1) or np.any(np.isnan(means)):
            raise ConfigError("means", "all means must lie in [0, 1]")
        if means.ndim == 1:
            if means.size != self.K:
                raise ConfigError("means", f"expected {self.K} values, got {means.size}")
            if np.unique(means).size < means.size:
                warnings.warn("homogeneous means are not pairwise distinct", stacklevel=2)
        elif means.ndim == 2:
            if means.shape != (self.M, self.K):
                raise ConfigError("means", f"expected shape {(self.M, self.K)}, got {means.shape}")
            if not 0 <= self.delta < 1:
                raise ConfigError("delta", "must lie in [0, 1)")
            base = feasible_base(means, self.delta)
            if base is None:
                raise ConfigError("means", f"matrix is not {self.delta}-heterogeneous")
            object.__setattr__(self, "base", base)
        else:
            raise ConfigError("means", "must be a vector or a matrix")

    @property
    def heterogeneous(self) -> bool:
        return self.means.ndim == 2

    def player_means(self, j: int) -> np.ndarray:
        return self.means[j] if self.heterogeneous else self.means

    @classmethod
    def from_base(cls, K, M, T, base, multipliers, delta, sensing=Sensing.FULL):
        """Heterogeneous model mu^j_k = base_k * multiplier^j_k."""
        mult = np.asarray(multipliers, dtype=float)
        if np.any(mult < 1 - delta - 1e-12) or np.any(mult > 1 + delta + 1e-12):
            raise ConfigError("multipliers", "must lie in [1-delta, 1+delta]")
        means = np.clip(np.asarray(base, dtype=float)[None, :] * mult, 0.0, 1.0)
        return cls(K, M, T, means, sensing=sensing, delta=delta)


@dataclass
class Observation:
    t: int
    arm: int
    value: float | None
    collision: int | None
    reward: float


@dataclass
class RoundRecord:
    t: int
    actions: tuple
    collided_arms: frozenset


class ArmDraws:
    """Arm values drawn in fixed-size chunks aligned on absolute rounds."""

    def __init__(self, model: EnvModel, gen: np.random.Generator, chunk: int = 2048):
        self.model = model
        self.gen = gen
        self.chunk = chunk
        self._start = -1
        self._cur = -1
        self._x = None
        self._rows = None
        if model.masses is not None:
            cum = np.cumsum(model.masses, axis=-1)
            self._cut0, self._cut1 = cum[..., 0], cum[..., 1]

    def _draw_chunk(self) -> np.ndarray:
        m = self.model
        shape = (self.chunk, m.M, m.K) if m.heterogeneous else (self.chunk, m.K)
        u = self.gen.random(shape)
        if m.masses is None:
            return (u < m.means).astype(float)
        return np.where(u < self._cut0, 0.0, np.where(u < self._cut1, 0.5, 1.0))

    def _load(self, c: int) -> None:
        # chunks are drawn strictly in order so access patterns never matter
        if c < self._cur:
            raise RuntimeError("arm draws must be read in round order")
        while self._cur < c:
            self._x = self._draw_chunk()
            self._cur += 1
        self._start = c * self.chunk
        self._rows = None

    def row(self, t: int):
        c = t // self.chunk
        if self._start != c * self.chunk:
            self._load(c)
        if self._rows is None:
            self._rows = self._x.tolist()
        return self._rows[t - self._start]

    def block(self, t: int, n: int) -> np.ndarray:
        parts = []
        while n > 0:
            c = t // self.chunk
            if self._start != c * self.chunk:
                self._load(c)
            off = t - self._start
            take = min(n, self.chunk - off)
            parts.append(self._x[off:off + take])
            t += take
            n -= take
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


class Environment:
    """Round-by-round interface: feed joint actions, get observations."""

    def __init__(self, model: EnvModel, seed: int):
        self.model = model
        self.draws = ArmDraws(model, substream(seed, "env"))
        self.t = 0

    def step(self, actions) -> tuple[list[Observation], RoundRecord]:
        m = self.model
        if self.t >= m.T:
            raise RuntimeError("horizon reached")
        if len(actions) != m.M:
            raise ValueError(f"expected {m.M} actions, got {len(actions)}")
        for j, a in enumerate(actions):
            if not (isinstance(a, (int, np.integer)) and 0 <= a < m.K):
                raise ProtocolViolation(j, f"arm {a!r} out of range [0, {m.K})")
        row = self.draws.row(self.t)
        acts = [int(a) for a in actions]
        obs = []
        collided = set()
        for j, a in enumerate(acts):
            eta = 1 if acts.count(a) > 1 else 0
            if eta:
                collided.add(a)
            x = row[j][a] if m.heterogeneous else row[a]
            r = 0.0 if eta else x
            if m.sensing is Sensing.FULL:
                obs.append(Observation(self.t, a, x, eta, r))
            elif m.sensing is Sensing.STATISTIC:
                obs.append(Observation(self.t, a, x, eta if x > 0 else None, r))
            else:
                obs.append(Observation(self.t, a, None, None, r))
        rec = RoundRecord(self.t, tuple(acts), frozenset(collided))
        self.t += 1
        return obs, rec
